#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "condcov/constants.hpp"
#include "condcov/matrix.hpp"

// Benchmark construction, benchmark-ordered splitting, and sample conditional
// moments.  Conventions follow the estimator definitions exactly: a quantile
// band (a,b) covers ranked indices floor(n a)+1 .. floor(n b), and both the
// conditional and unconditional covariances normalize by the subsample size
// (not size minus one).

namespace condcov {

struct LoadingFactor {
    double alpha1 = 1.0;
    double alpha2 = 1.0;
};

struct QuantileSplit {
    double a = 0.0;
    double b = 1.0;
};

struct BivariateSample {
    std::vector<double> x1;
    std::vector<double> x2;

    std::size_t n() const { return x1.size(); }
    void validate() const {
        if (x1.size() != x2.size())
            throw std::invalid_argument("BivariateSample: margin lengths differ");
        for (std::size_t i = 0; i < x1.size(); ++i)
            if (!std::isfinite(x1[i]) || !std::isfinite(x2[i]))
                throw std::invalid_argument("BivariateSample: non-finite value");
    }
};

/// Sample ranked by benchmark value; perm[i] is the original index of the
/// observation with the i-th smallest benchmark.
struct OrderedSample {
    const BivariateSample* sample = nullptr;
    std::vector<std::uint32_t> perm;

    std::size_t n() const { return perm.size(); }
};

struct CondMoments {
    double mu1 = 0.0;
    double mu2 = 0.0;
    double r = 0.0;       // conditional covariance, 1/m normalization
    std::size_t m = 0;    // subsample size
};

inline std::vector<double> benchmark(const BivariateSample& s, LoadingFactor alpha) {
    std::vector<double> y(s.n());
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] = alpha.alpha1 * s.x1[i] + alpha.alpha2 * s.x2[i];
    return y;
}

/// Stable ordering by benchmark value; ties keep original index order.
inline OrderedSample order_by_benchmark(const BivariateSample& s, LoadingFactor alpha) {
    const std::vector<double> y = benchmark(s, alpha);
    OrderedSample out;
    out.sample = &s;
    out.perm.resize(s.n());
    std::iota(out.perm.begin(), out.perm.end(), 0u);
    std::stable_sort(out.perm.begin(), out.perm.end(),
                     [&](std::uint32_t i, std::uint32_t j) { return y[i] < y[j]; });
    return out;
}

namespace detail {

/// floor(n*x) with a guard so that products meant to be integers (e.g. n*0.4
/// evaluated in binary floating point) land on the intended boundary.
inline std::size_t band_edge(std::size_t n, double x) {
    const double v = static_cast<double>(n) * x;
    return static_cast<std::size_t>(std::floor(v + 1e-9));
}

}  // namespace detail

inline CondMoments cond_moments(const OrderedSample& os, QuantileSplit split) {
    if (!(split.a >= 0.0 && split.a < split.b && split.b <= 1.0))
        throw std::invalid_argument("cond_moments: need 0 <= a < b <= 1");
    const std::size_t n = os.n();
    const std::size_t lo = detail::band_edge(n, split.a);
    const std::size_t hi = detail::band_edge(n, split.b);
    if (hi < lo + 2) throw std::invalid_argument("cond_moments: subsample too small");
    const auto& x1 = os.sample->x1;
    const auto& x2 = os.sample->x2;
    CondMoments cm;
    cm.m = hi - lo;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        s1 += x1[os.perm[i]];
        s2 += x2[os.perm[i]];
    }
    cm.mu1 = s1 / static_cast<double>(cm.m);
    cm.mu2 = s2 / static_cast<double>(cm.m);
    double sc = 0.0;
    for (std::size_t i = lo; i < hi; ++i)
        sc += (x1[os.perm[i]] - cm.mu1) * (x2[os.perm[i]] - cm.mu2);
    cm.r = sc / static_cast<double>(cm.m);
    return cm;
}

/// The three 20/60/20 band covariances of a benchmark-ordered sample.
inline std::array<double, 3> band_covariances(const OrderedSample& os, double q_tilde) {
    return {cond_moments(os, {0.0, q_tilde}).r,
            cond_moments(os, {q_tilde, 1.0 - q_tilde}).r,
            cond_moments(os, {1.0 - q_tilde, 1.0}).r};
}

/// r_A1 - 2 r_A2 + r_A3; zero in probability under a Gaussian sample.
inline double equilibrium_gap(const BivariateSample& s, LoadingFactor alpha, double q_tilde) {
    const OrderedSample os = order_by_benchmark(s, alpha);
    const auto r = band_covariances(os, q_tilde);
    return r[0] - 2.0 * r[1] + r[2];
}

/// Conditional covariance matrix of a bivariate normal on a quantile band of
/// the benchmark: cov[X] + (Var[Y|A] - Var[Y]) beta beta^T with beta the
/// regression coefficients of X on Y.
inline Matrix theoretical_cond_cov(const Matrix& sigma, LoadingFactor alpha,
                                   QuantileSplit split) {
    if (sigma.n != 2) throw std::invalid_argument("theoretical_cond_cov: sigma must be 2x2");
    if (!(split.a >= 0.0 && split.a < split.b && split.b <= 1.0))
        throw std::invalid_argument("theoretical_cond_cov: bad split");
    const double s11 = sigma(0, 0), s22 = sigma(1, 1), s12 = sigma(0, 1);
    if (std::fabs(sigma(1, 0) - s12) > 1e-12 * (1.0 + std::fabs(s12)))
        throw std::invalid_argument("theoretical_cond_cov: sigma not symmetric");
    const double det = s11 * s22 - s12 * s12;
    if (!(s11 > 0.0) || det <= 0.0)
        throw std::invalid_argument("theoretical_cond_cov: sigma not positive definite");
    const double a1 = alpha.alpha1, a2 = alpha.alpha2;
    const double var_y = a1 * a1 * s11 + a2 * a2 * s22 + 2.0 * a1 * a2 * s12;
    if (var_y <= 0.0) throw std::invalid_argument("theoretical_cond_cov: degenerate benchmark");
    const double l1 = lambda1(split.a, split.b);
    const double l2 = lambda2(split.a, split.b);
    const double shrink = var_y * (l2 - l1 * l1) - var_y;  // Var[Y|A] - Var[Y]
    const double b1 = (a1 * s11 + a2 * s12) / var_y;
    const double b2 = (a1 * s12 + a2 * s22) / var_y;
    Matrix out(2);
    out(0, 0) = s11 + shrink * b1 * b1;
    out(0, 1) = s12 + shrink * b1 * b2;
    out(1, 0) = out(0, 1);
    out(1, 1) = s22 + shrink * b2 * b2;
    return out;
}

/// Pearson correlation matrices on the three benchmark-ordered bands of a
/// k-column panel.  columns[j] is one margin; loading has one weight per
/// column.
inline std::array<Matrix, 3> conditional_corr_matrices(
    const std::vector<std::vector<double>>& columns, const std::vector<double>& loading,
    double q_tilde) {
    const std::size_t k = columns.size();
    if (k < 2) throw std::invalid_argument("conditional_corr_matrices: need k >= 2 columns");
    if (loading.size() != k)
        throw std::invalid_argument("conditional_corr_matrices: loading size mismatch");
    const std::size_t n = columns[0].size();
    for (const auto& c : columns)
        if (c.size() != n)
            throw std::invalid_argument("conditional_corr_matrices: ragged columns");

    std::vector<double> y(n, 0.0);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < n; ++i) y[i] += loading[j] * columns[j][i];
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::uint32_t i, std::uint32_t j) { return y[i] < y[j]; });

    const double edges[4] = {0.0, q_tilde, 1.0 - q_tilde, 1.0};
    std::array<Matrix, 3> out;
    for (int b = 0; b < 3; ++b) {
        const std::size_t lo = detail::band_edge(n, edges[b]);
        const std::size_t hi = detail::band_edge(n, edges[b + 1]);
        if (hi < lo + k + 1)
            throw std::invalid_argument("conditional_corr_matrices: band too small");
        const double m = static_cast<double>(hi - lo);
        std::vector<double> mean(k, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t i = lo; i < hi; ++i) mean[j] += columns[j][perm[i]];
            mean[j] /= m;
        }
        Matrix cov(k);
        for (std::size_t j1 = 0; j1 < k; ++j1)
            for (std::size_t j2 = j1; j2 < k; ++j2) {
                double s = 0.0;
                for (std::size_t i = lo; i < hi; ++i)
                    s += (columns[j1][perm[i]] - mean[j1]) * (columns[j2][perm[i]] - mean[j2]);
                cov(j1, j2) = cov(j2, j1) = s / m;
            }
        Matrix corr(k);
        for (std::size_t j1 = 0; j1 < k; ++j1) {
            if (cov(j1, j1) <= 0.0)
                throw std::runtime_error("conditional_corr_matrices: degenerate column in band");
        }
        for (std::size_t j1 = 0; j1 < k; ++j1)
            for (std::size_t j2 = 0; j2 < k; ++j2)
                corr(j1, j2) = cov(j1, j2) / std::sqrt(cov(j1, j1) * cov(j2, j2));
        out[b] = std::move(corr);
    }
    return out;
}

}  // namespace condcov
