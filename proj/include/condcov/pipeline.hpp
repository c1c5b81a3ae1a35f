#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "condcov/monte_carlo.hpp"
#include "condcov/version.hpp"

// Empirical workflow: strict CSV price ingestion, log returns, rank-based
// Gaussianization, the pairwise p-value matrix over all ten statistics, and
// the three band correlation matrices.  Null distributions are cached on disk
// keyed by (stat, n, N, seed).  Serialized artifacts carry no wall-clock
// data, so a fixed input and seed reproduce them byte for byte.

namespace condcov {

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Named, date-aligned panel of values (prices or returns).
struct Panel {
    std::vector<std::string> dates;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;  // one vector per name

    std::size_t rows() const { return dates.size(); }
    std::size_t cols() const { return names.size(); }
};

namespace detail {

inline bool parse_strict_double(const std::string& field, double& out) {
    if (field.empty()) return false;
    char* end = nullptr;
    out = std::strtod(field.c_str(), &end);
    return end == field.c_str() + field.size() && std::isfinite(out);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline bool looks_like_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

}  // namespace detail

/// Strict CSV loader: header `date,<name1>,...`, ISO dates, decimal-point
/// numerals.  Rows with empty cells are dropped (inner join across columns);
/// duplicate dates are an error; rows come back date-sorted.
inline Panel load_prices(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw CsvError(path + ": empty file");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header[0] != "date")
        throw CsvError(path + ": header must be date,<name1>,...");
    Panel p;
    p.names.assign(header.begin() + 1, header.end());
    for (std::size_t a = 0; a < p.names.size(); ++a)
        for (std::size_t b = a + 1; b < p.names.size(); ++b)
            if (p.names[a] == p.names[b])
                throw CsvError(path + ": duplicate column name " + p.names[a]);
    p.columns.resize(p.names.size());

    std::vector<std::pair<std::string, std::vector<double>>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw CsvError(path + ":" + std::to_string(lineno) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
        if (!detail::looks_like_iso_date(fields[0]))
            throw CsvError(path + ":" + std::to_string(lineno) +
                           ": bad ISO-8601 date '" + fields[0] + "'");
        bool missing = false;
        std::vector<double> vals(p.names.size());
        for (std::size_t j = 1; j < fields.size(); ++j) {
            if (fields[j].empty()) {
                missing = true;
                break;
            }
            if (!detail::parse_strict_double(fields[j], vals[j - 1]))
                throw CsvError(path + ":" + std::to_string(lineno) + ": column " +
                               std::to_string(j + 1) + ": cannot parse numeric field '" +
                               fields[j] + "'");
        }
        if (missing) continue;  // inner join drops incomplete rows
        rows.emplace_back(fields[0], std::move(vals));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].first == rows[i - 1].first)
            throw CsvError(path + ": duplicate date " + rows[i].first);
    for (auto& [date, vals] : rows) {
        p.dates.push_back(date);
        for (std::size_t j = 0; j < vals.size(); ++j) p.columns[j].push_back(vals[j]);
    }
    return p;
}

/// Logarithmic returns r_t = ln(p_t / p_{t-1}); drops the first date.
inline Panel log_returns(const Panel& prices) {
    if (prices.rows() < 2) throw std::invalid_argument("log_returns: need >= 2 rows");
    Panel out;
    out.names = prices.names;
    out.dates.assign(prices.dates.begin() + 1, prices.dates.end());
    out.columns.resize(prices.cols());
    for (std::size_t j = 0; j < prices.cols(); ++j) {
        const auto& c = prices.columns[j];
        for (double v : c)
            if (!(v > 0.0))
                throw std::invalid_argument("log_returns: nonpositive price in column " +
                                            prices.names[j]);
        out.columns[j].resize(c.size() - 1);
        for (std::size_t i = 1; i < c.size(); ++i)
            out.columns[j][i - 1] = std::log(c[i] / c[i - 1]);
    }
    return out;
}

/// Average ranks (1-based); ties share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x[a] < x[b]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
        i = j + 1;
    }
    return rank;
}

/// Rank-based marginal transform to standard normal: value at rank k maps to
/// Phi^{-1}(k / (n+1)).
inline Panel gaussianize(const Panel& panel) {
    if (panel.rows() < 20) throw std::invalid_argument("gaussianize: need n >= 20");
    Panel out;
    out.dates = panel.dates;
    out.names = panel.names;
    out.columns.resize(panel.cols());
    const double denom = static_cast<double>(panel.rows()) + 1.0;
    for (std::size_t j = 0; j < panel.cols(); ++j) {
        const auto& c = panel.columns[j];
        if (std::all_of(c.begin(), c.end(), [&](double v) { return v == c[0]; }))
            throw std::invalid_argument("gaussianize: constant column " + panel.names[j]);
        const auto ranks = average_ranks(c);
        out.columns[j].resize(c.size());
        for (std::size_t i = 0; i < c.size(); ++i)
            out.columns[j][i] = norm_quantile(ranks[i] / denom);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Null-distribution disk cache.
// ---------------------------------------------------------------------------

/// Cache of simulated null distributions: cache/null_<stat>_<n>_<N>_<seed>.bin,
/// an 8-byte magic header followed by sorted little-endian doubles.
class NullCache {
  public:
    explicit NullCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    static constexpr char kMagic[9] = "CCNULL01";

    std::filesystem::path file_for(Statistic st, std::size_t n, std::size_t N,
                                   std::uint64_t seed) const {
        std::string name = std::string("null_") + statistic_name(st) + "_" +
                           std::to_string(n) + "_" + std::to_string(N) + "_" +
                           std::to_string(seed) + ".bin";
        return dir_ / name;
    }

    NullDistribution get(Statistic st, std::size_t n, std::size_t N, std::uint64_t seed,
                         unsigned threads, const SplitConstants* sc = nullptr) {
        static_assert(std::endian::native == std::endian::little,
                      "cache format is little-endian");
        const auto path = file_for(st, n, N, seed);
        if (std::filesystem::exists(path)) {
            NullDistribution nd;
            nd.stat = st;
            nd.n = n;
            nd.replications = N;
            nd.master_seed = seed;
            std::ifstream in(path, std::ios::binary);
            char magic[8];
            in.read(magic, 8);
            if (!in || std::string(magic, 8) != std::string(kMagic, 8))
                throw std::runtime_error("null cache: bad magic in " + path.string());
            const auto bytes = std::filesystem::file_size(path) - 8;
            nd.values.resize(bytes / sizeof(double));
            in.read(reinterpret_cast<char*>(nd.values.data()),
                    static_cast<std::streamsize>(bytes));
            if (!in) throw std::runtime_error("null cache: short read in " + path.string());
            nd.failures = N - nd.values.size();
            return nd;
        }
        NullDistribution nd = simulate_null(st, n, N, seed, threads, sc);
        std::filesystem::create_directories(dir_);
        const auto tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out.write(kMagic, 8);
            out.write(reinterpret_cast<const char*>(nd.values.data()),
                      static_cast<std::streamsize>(nd.values.size() * sizeof(double)));
            if (!out) throw std::runtime_error("null cache: write failed: " + tmp);
        }
        std::filesystem::rename(tmp, path);
        return nd;
    }

  private:
    std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Pairwise testing report.
// ---------------------------------------------------------------------------

struct PairReport {
    std::string name1;
    std::string name2;
    std::map<std::string, double> p_values;   // statistic name -> p-value
    std::map<std::string, bool> rejected;     // at the configured level
    std::string error;                        // nonempty if this pair failed
};

struct PipelineResult {
    std::vector<PairReport> pairs;
    std::map<std::string, double> rejection_percent;  // per statistic
    std::size_t n = 0;
};

/// All-pairs test battery on a Gaussianized panel.
inline PipelineResult pairwise_report(const Panel& panel,
                                      const std::vector<Statistic>& stats, double size,
                                      NullCache& cache, std::size_t N,
                                      std::uint64_t seed, unsigned threads,
                                      const SplitConstants& sc) {
    const std::size_t n = panel.rows();
    PipelineResult res;
    res.n = n;

    std::map<Statistic, NullDistribution> nulls;
    for (Statistic st : stats)
        nulls.emplace(st, cache.get(st, n, N, seed, threads, &sc));

    for (std::size_t a = 0; a < panel.cols(); ++a) {
        for (std::size_t b = a + 1; b < panel.cols(); ++b) {
            PairReport pr;
            pr.name1 = panel.names[a];
            pr.name2 = panel.names[b];
            BivariateSample s;
            s.x1 = panel.columns[a];
            s.x2 = panel.columns[b];
            try {
                for (Statistic st : stats) {
                    const double value = evaluate_statistic(st, s, sc);
                    const double p = p_value(nulls.at(st), value, default_side(st));
                    pr.p_values[statistic_name(st)] = p;
                    pr.rejected[statistic_name(st)] = p < size;
                }
            } catch (const std::exception& e) {
                pr.error = e.what();
                pr.p_values.clear();
                pr.rejected.clear();
            }
            res.pairs.push_back(std::move(pr));
        }
    }
    for (Statistic st : stats) {
        const char* nm = statistic_name(st);
        std::size_t rej = 0, ok = 0;
        for (const auto& pr : res.pairs) {
            if (!pr.error.empty()) continue;
            ++ok;
            if (pr.rejected.at(nm)) ++rej;
        }
        res.rejection_percent[nm] =
            ok == 0 ? 0.0 : 100.0 * static_cast<double>(rej) / static_cast<double>(ok);
    }
    return res;
}

/// The three band correlation matrices for an arbitrary loading vector.
inline std::array<Matrix, 3> band_matrices(const Panel& panel,
                                           const std::vector<double>& loading,
                                           double q_tilde) {
    return conditional_corr_matrices(panel.columns, loading, q_tilde);
}

// ---------------------------------------------------------------------------
// JSON serialization.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline nlohmann::json report_json(const PipelineResult& res, double size,
                                  std::size_t N, std::uint64_t seed,
                                  const std::string& config_digest) {
    nlohmann::json j;
    j["tool_version"] = kVersion;
    j["master_seed"] = seed;
    j["config_digest"] = config_digest;
    j["n"] = res.n;
    j["null_replications"] = N;
    j["size"] = size;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& pr : res.pairs) {
        nlohmann::json p;
        p["pair"] = {pr.name1, pr.name2};
        if (pr.error.empty()) {
            p["p_values"] = pr.p_values;
            p["rejected"] = pr.rejected;
        } else {
            p["error"] = pr.error;
        }
        pairs.push_back(std::move(p));
    }
    j["pairs"] = std::move(pairs);
    j["rejection_percent"] = res.rejection_percent;
    return j;
}

inline nlohmann::json bands_json(const std::array<Matrix, 3>& bands,
                                 const std::vector<std::string>& names,
                                 std::uint64_t seed, const std::string& config_digest) {
    nlohmann::json j;
    j["tool_version"] = kVersion;
    j["master_seed"] = seed;
    j["config_digest"] = config_digest;
    j["names"] = names;
    const char* labels[3] = {"A1", "A2", "A3"};
    for (int b = 0; b < 3; ++b) {
        nlohmann::json m = nlohmann::json::array();
        for (std::size_t i = 0; i < bands[b].n; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t k = 0; k < bands[b].n; ++k) row.push_back(bands[b](i, k));
            m.push_back(std::move(row));
        }
        j["bands"][labels[b]] = std::move(m);
    }
    return j;
}

}  // namespace condcov
