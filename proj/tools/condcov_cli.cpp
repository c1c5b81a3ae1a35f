// Command-line front end: constants dump, single-sample testing, null
// simulation, power sweeps, and the empirical pipeline.
//
// Exit codes: 0 success, 1 statistical-check failure, 2 usage error,
// 3 I/O error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "condcov/condcov.hpp"
#include "condcov/fixture.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace condcov;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStatistical = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string sig12(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

json constants_to_json(const SplitConstants& sc) {
    json j;
    const auto put = [&](const char* k, double v) { j[k] = json::parse(sig12(v)); };
    put("q_tilde", sc.q_tilde);
    put("x_tilde", sc.x_tilde);
    put("lambda1_tail", sc.lambda1_tail);
    put("lambda2_tail", sc.lambda2_tail);
    put("xi_tail", sc.xi_tail);
    put("kappa_tail", sc.kappa_tail);
    put("lambda2_mid", sc.lambda2_mid);
    put("c1", sc.c1);
    put("c2", sc.c2);
    put("c3", sc.c3);
    put("k1", sc.k1);
    put("k2", sc.k2);
    put("k3", sc.k3);
    put("c1_t", sc.c1_t);
    put("c2_t", sc.c2_t);
    put("c3_t", sc.c3_t);
    put("k1_t", sc.k1_t);
    put("k2_t", sc.k2_t);
    put("k3_t", sc.k3_t);
    return j;
}

json diagnostics_to_json(const ConstantsDiagnostics& d) {
    json j;
    const auto put = [&](const char* k, double v) { j[k] = json::parse(sig12(v)); };
    put("root_residual", d.root_residual);
    put("stationarity_residual", d.stationarity_residual);
    put("fixed_point_delta", d.fixed_point_delta);
    put("lambda1_full", d.lambda1_full);
    put("lambda2_full_minus_1", d.lambda2_full_minus_1);
    put("kurtosis_full_minus_3", d.kurtosis_full_minus_3);
    put("k_identity", d.k_identity);
    put("c2_route_delta", d.c2_route_delta);
    put("c3_route_delta", d.c3_route_delta);
    put("c2_t_route_delta", d.c2_t_route_delta);
    put("c3_t_route_delta", d.c3_t_route_delta);
    return j;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// constants
// ---------------------------------------------------------------------------

int cmd_constants(double tolerance, double perturb) {
    SplitConstants sc = compute_constants();
    sc.k1 += perturb;
    const ConstantsDiagnostics d = check_constants(sc);
    const bool pass = d.max_abs() < tolerance;
    json out;
    out["tool_version"] = kVersion;
    out["constants"] = constants_to_json(sc);
    out["residuals"] = diagnostics_to_json(d);
    out["tolerance"] = tolerance;
    out["pass"] = pass;
    std::cout << out.dump(2) << "\n";
    return pass ? kExitOk : kExitStatistical;
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

BivariateSample load_bivariate_csv(const std::string& path, const std::string& cols) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    const auto header = detail::split_csv_line(line);
    const bool dated = !header.empty() && header[0] == "date";
    const std::vector<std::string> names(header.begin() + (dated ? 1 : 0), header.end());
    std::size_t c1 = 0, c2 = 1;
    if (!cols.empty()) {
        const auto comma = cols.find(',');
        if (comma == std::string::npos)
            throw CLI::ValidationError("--cols expects two comma-separated names");
        const std::string n1 = cols.substr(0, comma), n2 = cols.substr(comma + 1);
        const auto find = [&](const std::string& n) -> std::size_t {
            for (std::size_t i = 0; i < names.size(); ++i)
                if (names[i] == n) return i;
            throw CLI::ValidationError("--cols: no column named '" + n + "'");
        };
        c1 = find(n1);
        c2 = find(n2);
    } else if (names.size() != 2) {
        throw CLI::ValidationError("input has " + std::to_string(names.size()) +
                                   " value columns; select two with --cols");
    }
    BivariateSample s;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size())
            throw CsvError(path + ":" + std::to_string(lineno) + ": bad field count");
        const std::size_t off = dated ? 1 : 0;
        double v1 = 0.0, v2 = 0.0;
        if (!detail::parse_strict_double(f[off + c1], v1) ||
            !detail::parse_strict_double(f[off + c2], v2))
            throw CsvError(path + ":" + std::to_string(lineno) +
                           ": cannot parse numeric field");
        s.x1.push_back(v1);
        s.x2.push_back(v2);
    }
    s.validate();
    return s;
}

int cmd_test(const std::string& input, const std::string& cols, const std::string& stat,
             const std::string& side_str, std::size_t n_null, std::uint64_t seed,
             double size, const std::string& cache_dir, unsigned threads,
             const std::string& out_path) {
    const Statistic st = statistic_from_name(stat);
    const RejectionSide side =
        side_str.empty() ? default_side(st) : side_from_name(side_str);
    if (is_benchmark_statistic(st) && side != RejectionSide::Right)
        throw CLI::ValidationError("benchmark statistics support only right-sided tests");
    const BivariateSample s = load_bivariate_csv(input, cols);
    const SplitConstants sc = compute_constants();
    const double value = evaluate_statistic(st, s, sc);

    NullCache cache(cache_dir);
    const NullDistribution nd = cache.get(st, s.n(), n_null, seed, threads, &sc);
    const Thresholds th = threshold(nd, size, side);
    const double p = p_value(nd, value, side);

    json cfg;
    cfg["input"] = input;
    cfg["cols"] = cols;
    cfg["stat"] = stat;
    cfg["side"] = side_name(side);
    cfg["n_null"] = n_null;
    cfg["size"] = size;
    cfg["seed"] = seed;
    json out;
    out["tool_version"] = kVersion;
    out["master_seed"] = seed;
    out["config_digest"] = hex64(fnv1a64(cfg.dump()));
    out["n"] = s.n();
    out["statistic"] = statistic_name(st);
    out["side"] = side_name(side);
    out["value"] = value;
    if (std::isfinite(th.lower)) out["threshold_lower"] = th.lower;
    if (std::isfinite(th.upper)) out["threshold_upper"] = th.upper;
    out["size"] = size;
    out["p_value"] = p;
    out["reject"] = th.rejects(value);
    const std::string text = out.dump(2) + "\n";
    if (out_path.empty()) std::cout << text;
    else write_text_atomic(out_path, text);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// power
// ---------------------------------------------------------------------------

json cell_descriptor(const StatRequest& sr, const CopulaSpec& alt, std::size_t n,
                     const PowerConfig& cfg) {
    json c;
    c["stat"] = statistic_name(sr.stat);
    c["side"] = side_name(sr.side);
    c["alternative"] = detail::copula_to_json(alt);
    c["n"] = n;
    c["replications"] = cfg.replications;
    c["null_replications"] = cfg.null_replications;
    c["size"] = cfg.size;
    c["seed"] = cfg.seed;
    return c;
}

int cmd_power(const std::string& config_path, const std::string& out_dir, bool resume,
              bool dry_run, unsigned threads) {
    const PowerConfig cfg = load_power_config(config_path);
    const std::string digest = hex64(fnv1a64(cfg.canonical));

    struct Cell {
        StatRequest sr;
        CopulaSpec alt;
        std::size_t n;
        std::string id;
    };
    std::vector<Cell> cells;
    for (const auto& sr : cfg.stats)
        for (std::size_t n : cfg.n_grid)
            for (const auto& alt : cfg.alternatives) {
                Cell c{sr, alt, n, ""};
                c.id = hex64(fnv1a64(cell_descriptor(sr, alt, n, cfg).dump()));
                cells.push_back(std::move(c));
            }

    if (dry_run) {
        for (const auto& c : cells)
            std::cout << c.id << "  " << statistic_name(c.sr.stat) << " ("
                      << side_name(c.sr.side) << ")  n=" << c.n << "  "
                      << detail::copula_to_json(c.alt).dump() << "\n";
        std::cout << cells.size() << " cells\n";
        return kExitOk;
    }

    const fs::path dir(out_dir);
    fs::create_directories(dir / "cells");
    const SplitConstants sc = compute_constants();
    NullCache cache((dir / "cache").string());

    // thresholds per (stat, side, n)
    std::map<std::string, Thresholds> thresholds;
    for (const auto& sr : cfg.stats)
        for (std::size_t n : cfg.n_grid) {
            const std::string key = std::string(statistic_name(sr.stat)) + "|" +
                                    side_name(sr.side) + "|" + std::to_string(n);
            if (thresholds.count(key)) continue;
            const NullDistribution nd =
                cache.get(sr.stat, n, cfg.null_replications, cfg.seed, threads, &sc);
            thresholds.emplace(key, threshold(nd, cfg.size, sr.side));
        }

    std::size_t done = 0, computed = 0, failed = 0;
    for (const auto& c : cells) {
        const fs::path marker = dir / "cells" / (c.id + ".json");
        if (resume && fs::exists(marker)) {
            ++done;
            continue;
        }
        const std::string key = std::string(statistic_name(c.sr.stat)) + "|" +
                                side_name(c.sr.side) + "|" + std::to_string(c.n);
        json rec;
        rec["descriptor"] = cell_descriptor(c.sr, c.alt, c.n, cfg);
        try {
            const PowerCell pc = power(c.sr.stat, c.alt, c.n, cfg.replications,
                                       thresholds.at(key), cfg.seed, threads, &sc);
            rec["rate"] = pc.rejection_rate;
            rec["stderr"] = pc.mc_stderr;
            rec["failures"] = pc.failures;
            rec["ok"] = true;
            ++computed;
        } catch (const std::exception& e) {
            rec["ok"] = false;
            rec["error"] = e.what();
            ++failed;
        }
        write_text_atomic(marker, rec.dump(2) + "\n");
        std::cerr << "cell " << (done + computed + failed) << "/" << cells.size() << " "
                  << c.id << "\n";
    }

    // deterministic final table assembled from the markers
    std::ostringstream csv;
    csv << "stat,side,family,rho,nu,theta,n,replications,rate,stderr,failures,ok\n";
    for (const auto& c : cells) {
        std::ifstream in(dir / "cells" / (c.id + ".json"));
        if (!in) throw IoError("missing cell marker " + c.id);
        json rec;
        in >> rec;
        char line[256];
        const bool ok = rec.value("ok", false);
        std::snprintf(line, sizeof line,
                      "%s,%s,%s,%.10g,%.10g,%.10g,%zu,%zu,%.10g,%.10g,%zu,%d\n",
                      statistic_name(c.sr.stat), side_name(c.sr.side),
                      family_name(c.alt.family), c.alt.rho, c.alt.nu, c.alt.theta, c.n,
                      cfg.replications, ok ? rec.value("rate", 0.0) : 0.0,
                      ok ? rec.value("stderr", 0.0) : 0.0,
                      static_cast<std::size_t>(ok ? rec.value("failures", 0) : 0),
                      ok ? 1 : 0);
        csv << line;
    }
    write_text_atomic(dir / "results.csv", csv.str());

    json meta;
    meta["tool_version"] = kVersion;
    meta["master_seed"] = cfg.seed;
    meta["config_digest"] = digest;
    meta["config"] = json::parse(cfg.canonical);
    meta["cells"] = cells.size();
    write_text_atomic(dir / "metadata.json", meta.dump(2) + "\n");

    std::cerr << "power: " << computed << " computed, " << done << " resumed, " << failed
              << " failed -> " << (dir / "results.csv").string() << "\n";
    return failed == 0 ? kExitOk : kExitStatistical;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(const std::string& input, const std::string& out_dir,
                const std::string& stats_csv, double size, std::size_t n_null,
                std::uint64_t seed, const std::string& cache_dir, unsigned threads,
                bool already_returns) {
    std::vector<Statistic> stats;
    if (stats_csv.empty()) {
        stats = all_statistics();
    } else {
        std::stringstream ss(stats_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) stats.push_back(statistic_from_name(tok));
    }
    const Panel prices = load_prices(input);
    const Panel returns = already_returns ? prices : log_returns(prices);
    const Panel gauss = gaussianize(returns);

    const SplitConstants sc = compute_constants();
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    NullCache cache(cache_dir.empty() ? (dir / "cache").string() : cache_dir);

    const auto t0 = std::chrono::steady_clock::now();
    const PipelineResult res =
        pairwise_report(gauss, stats, size, cache, n_null, seed, threads, sc);

    json cfg;
    cfg["input"] = input;
    cfg["stats"] = stats_csv;
    cfg["size"] = size;
    cfg["n_null"] = n_null;
    cfg["seed"] = seed;
    const std::string digest = hex64(fnv1a64(cfg.dump()));

    write_text_atomic(dir / "report.json",
                      report_json(res, size, n_null, seed, digest).dump(2) + "\n");

    const std::vector<double> loading(gauss.cols(), 1.0);
    const auto bands = band_matrices(gauss, loading, sc.q_tilde);
    write_text_atomic(dir / "bands.json",
                      bands_json(bands, gauss.names, seed, digest).dump(2) + "\n");

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "analyze: " << res.pairs.size() << " pairs, n=" << res.n << ", " << elapsed
              << "s -> " << (dir / "report.json").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// nulldist
// ---------------------------------------------------------------------------

int cmd_nulldist(const std::string& stat, std::size_t n, std::size_t N,
                 std::uint64_t seed, const std::string& out_path, bool with_kde,
                 double grid_lo, double grid_hi, std::size_t grid_points,
                 unsigned threads) {
    const Statistic st = statistic_from_name(stat);
    const NullDistribution nd = simulate_null(st, n, N, seed, threads);
    std::ostringstream csv;
    csv << "# tool_version=" << kVersion << " stat=" << statistic_name(st) << " n=" << n
        << " N=" << N << " master_seed=" << seed << "\n";
    csv << "value\n";
    char buf[64];
    for (double v : nd.values) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        csv << buf;
    }
    write_text_atomic(out_path, csv.str());

    if (with_kde) {
        std::vector<double> grid(grid_points);
        for (std::size_t i = 0; i < grid_points; ++i)
            grid[i] = grid_lo + (grid_hi - grid_lo) * static_cast<double>(i) /
                                    static_cast<double>(grid_points - 1);
        const std::vector<double> dens = kde(nd.values, grid);
        std::ostringstream kcsv;
        kcsv << "# tool_version=" << kVersion << " stat=" << statistic_name(st)
             << " n=" << n << " N=" << N << " master_seed=" << seed << "\n";
        kcsv << "x,density\n";
        for (std::size_t i = 0; i < grid_points; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", grid[i], dens[i]);
            kcsv << buf;
        }
        const fs::path kp = fs::path(out_path).replace_extension(".kde.csv");
        write_text_atomic(kp, kcsv.str());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional-covariance Gaussian dependence tests"};
    app.require_subcommand(1);
    unsigned threads = default_threads();
    app.add_option("--threads", threads, "worker threads (default: cores)");

    auto* c_const = app.add_subcommand("constants", "print split constants as JSON");
    double tolerance = 1e-9;
    double perturb = 0.0;
    c_const->add_option("--tolerance", tolerance, "max allowed residual");
    c_const->add_option("--perturb", perturb, "test hook: offset k1 before checks")
        ->group("");  // hidden

    auto* c_test = app.add_subcommand("test", "run one test on a bivariate sample");
    std::string in_path, cols, stat = "T", side_str, out_path, cache_dir = "cache";
    std::size_t n_null = 20000;
    std::uint64_t seed = 1;
    double size = 0.05;
    c_test->add_option("--input", in_path, "CSV with two value columns")->required();
    c_test->add_option("--cols", cols, "two column names, comma separated");
    c_test->add_option("--stat", stat, "T L R T~ L~ R~ BHEP AD CM MS");
    c_test->add_option("--side", side_str, "two|left|right");
    c_test->add_option("--n-null", n_null, "null replications");
    c_test->add_option("--seed", seed, "master seed");
    c_test->add_option("--size", size, "test size");
    c_test->add_option("--cache", cache_dir, "null-distribution cache directory");
    c_test->add_option("--out", out_path, "write result JSON here instead of stdout");

    auto* c_power = app.add_subcommand("power", "run a power sweep from a config file");
    std::string config_path, out_dir = "power_out";
    bool resume = true, dry_run = false;
    c_power->add_option("--config", config_path, "TOML or JSON config")->required();
    c_power->add_option("--out", out_dir, "output directory");
    c_power->add_flag("--resume,!--no-resume", resume, "skip completed cells");
    c_power->add_flag("--dry-run", dry_run, "print the cell grid and exit");

    auto* c_analyze =
        app.add_subcommand("analyze", "pairwise dependence analysis of a panel");
    std::string a_input, a_out = "analysis_out", a_stats, a_cache;
    std::size_t a_n_null = 20000;
    std::uint64_t a_seed = 1;
    double a_size = 0.05;
    bool a_returns = false;
    c_analyze->add_option("--input", a_input, "price panel CSV (date,<names...>)")
        ->required();
    c_analyze->add_option("--out", a_out, "output directory");
    c_analyze->add_option("--stats", a_stats, "comma-separated subset of statistics");
    c_analyze->add_option("--size", a_size, "rejection level");
    c_analyze->add_option("--n-null", a_n_null, "null replications");
    c_analyze->add_option("--seed", a_seed, "master seed");
    c_analyze->add_option("--cache", a_cache, "cache directory (default <out>/cache)");
    c_analyze->add_flag("--returns", a_returns, "input already holds returns");

    auto* c_null = app.add_subcommand("nulldist", "simulate and dump a null distribution");
    std::string n_stat = "T", n_out = "nulldist.csv";
    std::size_t nd_n = 1000, nd_N = 20000;
    std::uint64_t nd_seed = 1;
    bool nd_kde = false;
    double grid_lo = -4.0, grid_hi = 4.0;
    std::size_t grid_points = 201;
    c_null->add_option("--stat", n_stat, "statistic name");
    c_null->add_option("--n", nd_n, "sample size");
    c_null->add_option("--N", nd_N, "replications");
    c_null->add_option("--seed", nd_seed, "master seed");
    c_null->add_option("--out", n_out, "values CSV path");
    c_null->add_flag("--kde", nd_kde, "also write a kernel density curve");
    c_null->add_option("--grid-lo", grid_lo, "KDE grid start");
    c_null->add_option("--grid-hi", grid_hi, "KDE grid end");
    c_null->add_option("--grid-points", grid_points, "KDE grid points");

    try {
        app.parse(argc, argv);
        if (c_const->parsed()) return cmd_constants(tolerance, perturb);
        if (c_test->parsed())
            return cmd_test(in_path, cols, stat, side_str, n_null, seed, size, cache_dir,
                            threads, out_path);
        if (c_power->parsed())
            return cmd_power(config_path, out_dir, resume, dry_run, threads);
        if (c_analyze->parsed())
            return cmd_analyze(a_input, a_out, a_stats, a_size, a_n_null, a_seed, a_cache,
                               threads, a_returns);
        if (c_null->parsed())
            return cmd_nulldist(n_stat, nd_n, nd_N, nd_seed, n_out, nd_kde, grid_lo,
                                grid_hi, grid_points, threads);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const CsvError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const StatisticError& e) {
        std::cerr << "statistical error: " << e.what() << "\n";
        return kExitStatistical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStatistical;
    }
}
