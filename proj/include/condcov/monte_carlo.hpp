#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "condcov/benchmark_tests.hpp"
#include "condcov/copulas.hpp"
#include "condcov/statistics.hpp"

// Seeded, parallel replication engine.  Every replication owns an RNG stream
// derived from (master seed, purpose, replication index), results land in
// per-replication slots, and aggregation is order independent, so output is a
// pure function of the configuration and master seed no matter how many
// threads run.

namespace condcov {

/// Statically partitioned parallel loop over [0, count).
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t, std::size_t)>& body) {
    if (threads <= 1 || count < 2) {
        body(0, count);
        return;
    }
    threads = std::min<unsigned>(threads, static_cast<unsigned>(count));
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (count + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(body, lo, hi);
    }
    for (auto& th : pool) th.join();
}

inline unsigned default_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

/// Every statistic the engine can simulate: the six conditional-covariance
/// statistics plus the four benchmarks.
enum class Statistic { T, L, R, Ttilde, Ltilde, Rtilde, BHEP, AD, CM, MS };

inline const char* statistic_name(Statistic s) {
    switch (s) {
        case Statistic::T: return "T";
        case Statistic::L: return "L";
        case Statistic::R: return "R";
        case Statistic::Ttilde: return "T~";
        case Statistic::Ltilde: return "L~";
        case Statistic::Rtilde: return "R~";
        case Statistic::BHEP: return "BHEP";
        case Statistic::AD: return "AD";
        case Statistic::CM: return "CM";
        case Statistic::MS: return "MS";
    }
    return "?";
}

inline const std::vector<Statistic>& all_statistics() {
    static const std::vector<Statistic> v{
        Statistic::BHEP,   Statistic::AD,     Statistic::CM,     Statistic::MS,
        Statistic::T,      Statistic::L,      Statistic::R,
        Statistic::Ttilde, Statistic::Ltilde, Statistic::Rtilde};
    return v;
}

inline Statistic statistic_from_name(const std::string& s) {
    for (Statistic k : all_statistics())
        if (s == statistic_name(k)) return k;
    throw std::invalid_argument("unknown statistic: " + s);
}

inline bool is_benchmark_statistic(Statistic s) {
    return s == Statistic::BHEP || s == Statistic::AD || s == Statistic::CM ||
           s == Statistic::MS;
}

/// The benchmarks only support right-sided rejection; the conditional
/// covariance statistics default to two-sided.
inline RejectionSide default_side(Statistic st) {
    return is_benchmark_statistic(st) ? RejectionSide::Right : RejectionSide::TwoSided;
}

inline double evaluate_statistic(Statistic st, const BivariateSample& s,
                                 const SplitConstants& sc,
                                 LoadingFactor alpha = {1.0, 1.0}) {
    switch (st) {
        case Statistic::T: return t_stat(s, alpha, sc);
        case Statistic::L: return l_stat(s, alpha, sc);
        case Statistic::R: return r_stat(s, alpha, sc);
        case Statistic::Ttilde: return t_tilde(s, sc);
        case Statistic::Ltilde: return l_tilde(s, sc);
        case Statistic::Rtilde: return r_tilde(s, sc);
        case Statistic::BHEP: return bhep(s);
        case Statistic::AD: return ad(s);
        case Statistic::CM: return cm(s);
        case Statistic::MS: return ms(s);
    }
    throw std::logic_error("evaluate_statistic: bad statistic");
}

namespace detail {

inline std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
    h ^= v;
    return h * 0x100000001b3ULL;
}

inline std::uint64_t purpose_id(std::uint64_t tag, Statistic st, std::size_t n,
                                const CopulaSpec* spec = nullptr) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv_mix(h, tag);
    h = fnv_mix(h, static_cast<std::uint64_t>(st));
    h = fnv_mix(h, static_cast<std::uint64_t>(n));
    if (spec) {
        h = fnv_mix(h, static_cast<std::uint64_t>(spec->family));
        h = fnv_mix(h, std::bit_cast<std::uint64_t>(spec->rho));
        h = fnv_mix(h, std::bit_cast<std::uint64_t>(spec->nu));
        h = fnv_mix(h, std::bit_cast<std::uint64_t>(spec->theta));
    }
    return h;
}

}  // namespace detail

/// Sorted simulated null distribution with full provenance.
struct NullDistribution {
    Statistic stat = Statistic::T;
    std::size_t n = 0;
    std::size_t replications = 0;  // requested N
    std::uint64_t master_seed = 0;
    std::size_t failures = 0;
    std::vector<double> values;  // ascending, one per successful replication
};

/// Simulates the statistic under independent standard normal margins.
/// Deterministic for a fixed master seed under any thread count.
inline NullDistribution simulate_null(Statistic st, std::size_t n, std::size_t N,
                                      std::uint64_t master_seed,
                                      unsigned threads = default_threads(),
                                      const SplitConstants* constants = nullptr) {
    if (n < 20) throw std::invalid_argument("simulate_null: n must be >= 20");
    if (N < 1000) throw std::invalid_argument("simulate_null: N must be >= 1000");
    static const SplitConstants default_sc = compute_constants();
    const SplitConstants& sc = constants ? *constants : default_sc;
    const std::uint64_t purpose = detail::purpose_id(purpose::kNullSim, st, n);

    std::vector<double> slots(N, std::numeric_limits<double>::quiet_NaN());
    parallel_for(N, threads, [&](std::size_t lo, std::size_t hi) {
        const CopulaSpec null_spec{CopulaFamily::Gaussian, 0.0, 0.0, 0.0};
        for (std::size_t r = lo; r < hi; ++r) {
            Rng rng(master_seed, purpose, r);
            try {
                const BivariateSample s = sample(null_spec, n, rng);
                slots[r] = evaluate_statistic(st, s, sc);
            } catch (const std::exception&) {
                // leave NaN; counted below
            }
        }
    });

    NullDistribution nd;
    nd.stat = st;
    nd.n = n;
    nd.replications = N;
    nd.master_seed = master_seed;
    nd.values.reserve(N);
    for (double v : slots) {
        if (std::isnan(v)) ++nd.failures;
        else nd.values.push_back(v);
    }
    if (nd.failures * 1000 > N)
        throw std::runtime_error("simulate_null: more than 0.1% of replications failed");
    std::sort(nd.values.begin(), nd.values.end());
    return nd;
}

/// Rejection region at a given size; equal-tail split for two-sided tests.
struct Thresholds {
    RejectionSide side = RejectionSide::TwoSided;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    bool rejects(double observed) const {
        switch (side) {
            case RejectionSide::Left: return observed < lower;
            case RejectionSide::Right: return observed > upper;
            case RejectionSide::TwoSided: return observed < lower || observed > upper;
        }
        return false;
    }
};

inline Thresholds threshold(const NullDistribution& null, double size, RejectionSide side) {
    if (!(size > 0.0 && size < 1.0)) throw std::invalid_argument("threshold: bad size");
    const auto& v = null.values;
    const std::size_t N = v.size();
    Thresholds th;
    th.side = side;
    const auto tail_count = [&](double s) {
        const std::size_t m = static_cast<std::size_t>(std::floor(s * static_cast<double>(N)));
        if (m == 0 || m >= N)
            throw std::invalid_argument("threshold: N too small for requested tail");
        return m;
    };
    switch (side) {
        case RejectionSide::Right:
            th.upper = v[N - 1 - tail_count(size)];
            break;
        case RejectionSide::Left:
            th.lower = v[tail_count(size)];
            break;
        case RejectionSide::TwoSided: {
            const std::size_t m = tail_count(0.5 * size);
            th.lower = v[m];
            th.upper = v[N - 1 - m];
            break;
        }
    }
    return th;
}

/// Add-one Monte Carlo p-value; never returns zero.
inline double p_value(const NullDistribution& null, double observed, RejectionSide side) {
    const auto& v = null.values;
    const double N = static_cast<double>(v.size());
    const auto right = [&] {
        const auto it = std::upper_bound(v.begin(), v.end(), observed);
        return (1.0 + static_cast<double>(v.end() - it)) / (N + 1.0);
    };
    const auto left = [&] {
        const auto it = std::lower_bound(v.begin(), v.end(), observed);
        return (1.0 + static_cast<double>(it - v.begin())) / (N + 1.0);
    };
    switch (side) {
        case RejectionSide::Right: return right();
        case RejectionSide::Left: return left();
        case RejectionSide::TwoSided: return std::min(1.0, 2.0 * std::min(left(), right()));
    }
    throw std::logic_error("p_value: bad side");
}

/// One power-table cell.
struct PowerCell {
    CopulaSpec copula;
    std::size_t n = 0;
    std::size_t replications = 0;
    Statistic stat = Statistic::T;
    RejectionSide side = RejectionSide::TwoSided;
    double rejection_rate = 0.0;
    double mc_stderr = 0.0;
    std::size_t failures = 0;
};

inline PowerCell power(Statistic st, const CopulaSpec& spec, std::size_t n, std::size_t N,
                       const Thresholds& th, std::uint64_t master_seed,
                       unsigned threads = default_threads(),
                       const SplitConstants* constants = nullptr,
                       LoadingFactor alpha = {1.0, 1.0}) {
    spec.validate();
    static const SplitConstants default_sc = compute_constants();
    const SplitConstants& sc = constants ? *constants : default_sc;
    const std::uint64_t purpose = detail::purpose_id(purpose::kPowerSim, st, n, &spec);

    std::vector<std::uint8_t> rej(N, 0);
    std::atomic<std::size_t> failures{0};
    parallel_for(N, threads, [&](std::size_t lo, std::size_t hi) {
        std::size_t local_fail = 0;
        for (std::size_t r = lo; r < hi; ++r) {
            Rng rng(master_seed, purpose, r);
            try {
                const BivariateSample s = sample(spec, n, rng);
                rej[r] = th.rejects(evaluate_statistic(st, s, sc, alpha)) ? 1 : 0;
            } catch (const std::exception&) {
                ++local_fail;
            }
        }
        failures += local_fail;
    });

    PowerCell cell;
    cell.copula = spec;
    cell.n = n;
    cell.replications = N;
    cell.stat = st;
    cell.side = th.side;
    cell.failures = failures.load();
    if (cell.failures * 1000 > N)
        throw std::runtime_error("power: more than 0.1% of replications failed");
    std::size_t hits = 0;
    for (std::uint8_t b : rej) hits += b;
    const double denom = static_cast<double>(N - cell.failures);
    cell.rejection_rate = static_cast<double>(hits) / denom;
    cell.mc_stderr = std::sqrt(cell.rejection_rate * (1.0 - cell.rejection_rate) / denom);
    return cell;
}

/// Empirical type-I error against correlated Gaussian nulls, with thresholds
/// calibrated once per (stat, n) on the independent null.
inline std::vector<PowerCell> type1_sweep(const std::vector<double>& rho_grid,
                                          const std::vector<std::size_t>& n_grid,
                                          const std::vector<Statistic>& stats,
                                          double size, RejectionSide side, std::size_t N,
                                          std::size_t N_threshold, std::uint64_t master_seed,
                                          unsigned threads = default_threads()) {
    std::vector<PowerCell> cells;
    for (std::size_t n : n_grid) {
        for (Statistic st : stats) {
            const NullDistribution nd = simulate_null(st, n, N_threshold, master_seed, threads);
            const Thresholds th = threshold(nd, size, side);
            for (double rho : rho_grid) {
                CopulaSpec spec{CopulaFamily::Gaussian, rho, 0.0, 0.0};
                cells.push_back(power(st, spec, n, N, th, master_seed, threads));
            }
        }
    }
    return cells;
}

/// Gaussian-kernel density estimate with the plug-in bandwidth
/// 1.06 sigma N^{-1/5}, evaluated on a caller-supplied grid.
inline std::vector<double> kde(const std::vector<double>& values,
                               const std::vector<double>& grid) {
    if (values.size() < 100) throw std::invalid_argument("kde: need at least 100 values");
    const double N = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= N;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= N;
    const double h = 1.06 * std::sqrt(var) * std::pow(N, -0.2);
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (double v : values) acc += norm_pdf((grid[g] - v) / h);
        out[g] = acc / (N * h);
    }
    return out;
}

}  // namespace condcov
