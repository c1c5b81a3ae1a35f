#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "condcov/monte_carlo.hpp"

// Experiment configuration for power sweeps: a small TOML subset (scalars,
// arrays of scalars, [section] tables and [[array-of-table]] entries) with a
// JSON fallback keyed on the file extension.

namespace condcov {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace toml {

struct Value {
    std::variant<double, bool, std::string, std::vector<Value>> v;

    bool is_number() const { return std::holds_alternative<double>(v); }
    bool is_bool() const { return std::holds_alternative<bool>(v); }
    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_array() const { return std::holds_alternative<std::vector<Value>>(v); }
    double number() const { return std::get<double>(v); }
    bool boolean() const { return std::get<bool>(v); }
    const std::string& str() const { return std::get<std::string>(v); }
    const std::vector<Value>& array() const { return std::get<std::vector<Value>>(v); }
};

struct Table {
    std::map<std::string, Value> entries;
    std::map<std::string, std::vector<Table>> table_arrays;

    bool has(const std::string& k) const { return entries.count(k) != 0; }
    const Value& at(const std::string& k) const {
        const auto it = entries.find(k);
        if (it == entries.end()) throw ConfigError("missing config key: " + k);
        return it->second;
    }
};

namespace detail {

inline std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::string drop_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        else if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

Value parse_value(const std::string& raw, int lineno);

inline std::vector<Value> parse_array(const std::string& body, int lineno) {
    std::vector<Value> out;
    std::string cur;
    bool in_str = false;
    int depth = 0;
    for (char ch : body) {
        if (ch == '"') in_str = !in_str;
        if (!in_str && ch == '[') ++depth;
        if (!in_str && ch == ']') --depth;
        if (ch == ',' && !in_str && depth == 0) {
            if (!strip(cur).empty()) out.push_back(parse_value(strip(cur), lineno));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!strip(cur).empty()) out.push_back(parse_value(strip(cur), lineno));
    return out;
}

inline Value parse_value(const std::string& raw, int lineno) {
    const std::string s = strip(raw);
    if (s.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty value");
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ConfigError("line " + std::to_string(lineno) + ": unterminated string");
        return Value{s.substr(1, s.size() - 2)};
    }
    if (s.front() == '[') {
        if (s.back() != ']')
            throw ConfigError("line " + std::to_string(lineno) + ": unterminated array");
        return Value{parse_array(s.substr(1, s.size() - 2), lineno)};
    }
    if (s == "true") return Value{true};
    if (s == "false") return Value{false};
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (end == s.c_str() + s.size()) return Value{d};
    throw ConfigError("line " + std::to_string(lineno) + ": cannot parse value '" + s + "'");
}

}  // namespace detail

/// Parses the TOML subset used by experiment configs.
inline Table parse(std::istream& in) {
    Table root;
    Table* current = &root;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = detail::strip(detail::drop_comment(line));
        if (s.empty()) continue;
        if (s.size() >= 4 && s.substr(0, 2) == "[[" && s.substr(s.size() - 2) == "]]") {
            const std::string name = detail::strip(s.substr(2, s.size() - 4));
            root.table_arrays[name].emplace_back();
            current = &root.table_arrays[name].back();
            continue;
        }
        if (s.front() == '[' && s.back() == ']') {
            throw ConfigError("line " + std::to_string(lineno) +
                              ": [section] tables are not used; use top-level keys or [[" +
                              detail::strip(s.substr(1, s.size() - 2)) + "]]");
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::strip(s.substr(0, eq));
        current->entries[key] = detail::parse_value(s.substr(eq + 1), lineno);
    }
    return root;
}

inline Table parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    return parse(in);
}

}  // namespace toml

/// One requested power evaluation: a statistic with its rejection side.
struct StatRequest {
    Statistic stat = Statistic::T;
    RejectionSide side = RejectionSide::TwoSided;
};

/// Power-sweep configuration.
struct PowerConfig {
    std::vector<StatRequest> stats;
    std::vector<std::size_t> n_grid;
    std::vector<CopulaSpec> alternatives;
    std::size_t replications = 20000;       // per power cell
    std::size_t null_replications = 100000;  // for thresholds
    double size = 0.05;
    std::uint64_t seed = 1;
    std::string canonical;  // canonical JSON text of the parsed config
};

inline RejectionSide side_from_name(const std::string& s) {
    if (s == "two" || s == "two_sided" || s == "two-sided") return RejectionSide::TwoSided;
    if (s == "left") return RejectionSide::Left;
    if (s == "right") return RejectionSide::Right;
    throw ConfigError("unknown rejection side: " + s);
}

namespace detail {

inline CopulaSpec copula_from_fields(const std::string& family, double rho, double nu,
                                     double theta) {
    CopulaSpec spec;
    spec.family = family_from_name(family);
    spec.rho = rho;
    spec.nu = nu;
    spec.theta = theta;
    spec.validate();
    return spec;
}

inline nlohmann::json copula_to_json(const CopulaSpec& c) {
    nlohmann::json j;
    j["family"] = family_name(c.family);
    if (c.family == CopulaFamily::Gaussian || c.family == CopulaFamily::StudentT)
        j["rho"] = c.rho;
    if (c.family == CopulaFamily::StudentT) j["nu"] = c.nu;
    if (c.family != CopulaFamily::Gaussian && c.family != CopulaFamily::StudentT)
        j["theta"] = c.theta;
    return j;
}

inline CopulaSpec copula_from_json(const nlohmann::json& j) {
    return copula_from_fields(j.at("family").get<std::string>(), j.value("rho", 0.0),
                              j.value("nu", 0.0), j.value("theta", 0.0));
}

}  // namespace detail

/// Canonical JSON image of a power config (used for digests and resume markers).
inline nlohmann::json power_config_json(const PowerConfig& cfg) {
    nlohmann::json j;
    nlohmann::json stats = nlohmann::json::array();
    for (const auto& sr : cfg.stats)
        stats.push_back({{"stat", statistic_name(sr.stat)}, {"side", side_name(sr.side)}});
    j["stats"] = std::move(stats);
    j["n"] = cfg.n_grid;
    nlohmann::json alts = nlohmann::json::array();
    for (const auto& a : cfg.alternatives) alts.push_back(detail::copula_to_json(a));
    j["alternatives"] = std::move(alts);
    j["replications"] = cfg.replications;
    j["null_replications"] = cfg.null_replications;
    j["size"] = cfg.size;
    j["seed"] = cfg.seed;
    return j;
}

inline PowerConfig power_config_from_json(const nlohmann::json& j) {
    PowerConfig cfg;
    for (const auto& s : j.at("stats")) {
        StatRequest sr;
        if (s.is_string()) {
            sr.stat = statistic_from_name(s.get<std::string>());
            sr.side = default_side(sr.stat);
        } else {
            sr.stat = statistic_from_name(s.at("stat").get<std::string>());
            sr.side = s.contains("side") ? side_from_name(s.at("side").get<std::string>())
                                         : default_side(sr.stat);
        }
        cfg.stats.push_back(sr);
    }
    for (const auto& n : j.at("n")) cfg.n_grid.push_back(n.get<std::size_t>());
    for (const auto& a : j.at("alternatives"))
        cfg.alternatives.push_back(detail::copula_from_json(a));
    cfg.replications = j.value("replications", cfg.replications);
    cfg.null_replications = j.value("null_replications", cfg.null_replications);
    cfg.size = j.value("size", cfg.size);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.canonical = power_config_json(cfg).dump();
    return cfg;
}

/// Loads a .toml or .json power config.
inline PowerConfig load_power_config(const std::string& path) {
    const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
    if (is_json) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config: " + path);
        nlohmann::json j;
        in >> j;
        return power_config_from_json(j);
    }
    const toml::Table t = toml::parse_file(path);
    nlohmann::json j;
    if (!t.has("stats")) throw ConfigError("config: missing 'stats'");
    nlohmann::json stats = nlohmann::json::array();
    const auto& sv = t.at("stats").array();
    const std::vector<toml::Value>* sides = nullptr;
    if (t.has("sides")) sides = &t.at("sides").array();
    for (std::size_t i = 0; i < sv.size(); ++i) {
        nlohmann::json s;
        s["stat"] = sv[i].str();
        if (sides) {
            if (sides->size() != sv.size())
                throw ConfigError("config: 'sides' must match 'stats' length");
            s["side"] = (*sides)[i].str();
        }
        stats.push_back(std::move(s));
    }
    j["stats"] = std::move(stats);
    if (!t.has("n")) throw ConfigError("config: missing 'n'");
    nlohmann::json ns = nlohmann::json::array();
    for (const auto& v : t.at("n").array()) ns.push_back(static_cast<std::size_t>(v.number()));
    j["n"] = std::move(ns);
    nlohmann::json alts = nlohmann::json::array();
    const auto it = t.table_arrays.find("alternatives");
    if (it == t.table_arrays.end() || it->second.empty())
        throw ConfigError("config: need at least one [[alternatives]] entry");
    for (const auto& at : it->second) {
        nlohmann::json a;
        a["family"] = at.at("family").str();
        if (at.has("rho")) a["rho"] = at.at("rho").number();
        if (at.has("nu")) a["nu"] = at.at("nu").number();
        if (at.has("theta")) a["theta"] = at.at("theta").number();
        alts.push_back(std::move(a));
    }
    j["alternatives"] = std::move(alts);
    if (t.has("replications")) j["replications"] = static_cast<std::size_t>(t.at("replications").number());
    if (t.has("null_replications"))
        j["null_replications"] = static_cast<std::size_t>(t.at("null_replications").number());
    if (t.has("size")) j["size"] = t.at("size").number();
    if (t.has("seed")) j["seed"] = static_cast<std::uint64_t>(t.at("seed").number());
    return power_config_from_json(j);
}

}  // namespace condcov
