#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "condcov/moments.hpp"

// The six conditional-covariance test statistics: the symmetric statistic T,
// the one-sided pair L/R, and their decorrelated versions applied to the
// normalized sum/difference transform of the sample.

namespace condcov {

enum class StatKind { T, L, R, Ttilde, Ltilde, Rtilde };
enum class RejectionSide { TwoSided, Left, Right };

inline const char* stat_name(StatKind k) {
    switch (k) {
        case StatKind::T: return "T";
        case StatKind::L: return "L";
        case StatKind::R: return "R";
        case StatKind::Ttilde: return "T~";
        case StatKind::Ltilde: return "L~";
        case StatKind::Rtilde: return "R~";
    }
    return "?";
}

inline const char* side_name(RejectionSide s) {
    switch (s) {
        case RejectionSide::TwoSided: return "two";
        case RejectionSide::Left: return "left";
        case RejectionSide::Right: return "right";
    }
    return "?";
}

/// Raised when a statistic cannot be formed; carries the diagnostic value.
struct StatisticError : std::runtime_error {
    double value;
    explicit StatisticError(const std::string& what, double v = 0.0)
        : std::runtime_error(what), value(v) {}
};

/// Unconditional sample moments (all 1/n-normalized) plus the benchmark
/// moments implied by the loading factor.
struct UnconditionalMoments {
    double sigma1_sq = 0.0;
    double sigma2_sq = 0.0;
    double r = 0.0;
    double r_y1 = 0.0;      // cov(Y, X1)
    double r_y2 = 0.0;      // cov(Y, X2)
    double sigma_y_sq = 0.0;
};

inline UnconditionalMoments unconditional_moments(const BivariateSample& s,
                                                  LoadingFactor alpha) {
    const std::size_t n = s.n();
    if (n < 2) throw StatisticError("unconditional_moments: need n >= 2");
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) { m1 += s.x1[i]; m2 += s.x2[i]; }
    m1 /= static_cast<double>(n);
    m2 /= static_cast<double>(n);
    double v1 = 0.0, v2 = 0.0, cv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d1 = s.x1[i] - m1, d2 = s.x2[i] - m2;
        v1 += d1 * d1;
        v2 += d2 * d2;
        cv += d1 * d2;
    }
    UnconditionalMoments um;
    um.sigma1_sq = v1 / static_cast<double>(n);
    um.sigma2_sq = v2 / static_cast<double>(n);
    um.r = cv / static_cast<double>(n);
    const double a1 = alpha.alpha1, a2 = alpha.alpha2;
    um.r_y1 = a1 * um.sigma1_sq + a2 * um.r;
    um.r_y2 = a1 * um.r + a2 * um.sigma2_sq;
    um.sigma_y_sq = (a1 * a1 * um.sigma1_sq + a2 * a2 * um.sigma2_sq) + 2.0 * a1 * a2 * um.r;
    return um;
}

namespace detail {

// Shared quadratic form of the two normalizers; k-constants differ.
// The symmetric grouping keeps the value bit-identical under a margin swap.
inline double normalizer_sq(const UnconditionalMoments& um, double k1, double k2,
                            double k3) {
    if (!(um.sigma1_sq > 0.0) || !(um.sigma2_sq > 0.0) || !(um.sigma_y_sq > 0.0))
        throw StatisticError("normalizer: degenerate margins or benchmark");
    const double ratio = um.r_y1 * um.r_y2 / um.sigma_y_sq;
    const double cross = (um.r_y1 * um.r_y1 * um.sigma2_sq +
                          um.r_y2 * um.r_y2 * um.sigma1_sq) +
                         2.0 * um.r_y1 * um.r_y2 * um.r;
    return ratio * ratio * k1 + cross / um.sigma_y_sq * k2 +
           (um.sigma1_sq * um.sigma2_sq + 2.0 * um.r_y1 * um.r_y2 * um.r / um.sigma_y_sq) * k3;
}

}  // namespace detail

/// Normalizer of the symmetric statistic (square root of the K-weighted form).
inline double tau_hat(const BivariateSample& s, LoadingFactor alpha,
                      const SplitConstants& sc) {
    const auto um = unconditional_moments(s, alpha);
    const double t2 = detail::normalizer_sq(um, sc.k1, sc.k2, sc.k3);
    if (!(t2 > 0.0)) throw StatisticError("tau_hat: nonpositive tau^2", t2);
    return std::sqrt(t2);
}

/// Normalizer shared by the one-sided statistics.
inline double eta_hat(const BivariateSample& s, LoadingFactor alpha,
                      const SplitConstants& sc) {
    const auto um = unconditional_moments(s, alpha);
    const double e2 = detail::normalizer_sq(um, sc.k1_t, sc.k2_t, sc.k3_t);
    if (!(e2 > 0.0)) throw StatisticError("eta_hat: nonpositive eta^2", e2);
    return std::sqrt(e2);
}

inline double t_stat(const BivariateSample& s, LoadingFactor alpha,
                     const SplitConstants& sc) {
    const OrderedSample os = order_by_benchmark(s, alpha);
    const auto r = band_covariances(os, sc.q_tilde);
    const double gap = r[0] - 2.0 * r[1] + r[2];
    return std::sqrt(static_cast<double>(s.n())) * gap / tau_hat(s, alpha, sc);
}

inline double l_stat(const BivariateSample& s, LoadingFactor alpha,
                     const SplitConstants& sc) {
    const OrderedSample os = order_by_benchmark(s, alpha);
    const auto r = band_covariances(os, sc.q_tilde);
    return std::sqrt(static_cast<double>(s.n())) * (r[0] - r[1]) / eta_hat(s, alpha, sc);
}

inline double r_stat(const BivariateSample& s, LoadingFactor alpha,
                     const SplitConstants& sc) {
    const OrderedSample os = order_by_benchmark(s, alpha);
    const auto r = band_covariances(os, sc.q_tilde);
    return std::sqrt(static_cast<double>(s.n())) * (r[2] - r[1]) / eta_hat(s, alpha, sc);
}

/// Normalized sum/difference transform.  Each output margin has 1/n-sample
/// variance exactly one; for equal input variances the output covariance
/// vanishes identically.
inline BivariateSample decorrelate(const BivariateSample& s) {
    const auto um = unconditional_moments(s, {1.0, 1.0});
    const double var_sum = (um.sigma1_sq + um.sigma2_sq) + 2.0 * um.r;
    const double var_diff = (um.sigma1_sq + um.sigma2_sq) - 2.0 * um.r;
    if (!(var_sum > 0.0) || !(var_diff > 0.0))
        throw StatisticError("decorrelate: degenerate sum or difference margin");
    const double s_sum = std::sqrt(var_sum), s_diff = std::sqrt(var_diff);
    BivariateSample out;
    out.x1.resize(s.n());
    out.x2.resize(s.n());
    for (std::size_t i = 0; i < s.n(); ++i) {
        out.x1[i] = (s.x1[i] + s.x2[i]) / s_sum;
        out.x2[i] = (s.x1[i] - s.x2[i]) / s_diff;
    }
    return out;
}

inline double t_tilde(const BivariateSample& s, const SplitConstants& sc) {
    return t_stat(decorrelate(s), {1.0, 1.0}, sc);
}
inline double l_tilde(const BivariateSample& s, const SplitConstants& sc) {
    return l_stat(decorrelate(s), {1.0, 1.0}, sc);
}
inline double r_tilde(const BivariateSample& s, const SplitConstants& sc) {
    return r_stat(decorrelate(s), {1.0, 1.0}, sc);
}

inline double evaluate_stat(StatKind k, const BivariateSample& s, LoadingFactor alpha,
                            const SplitConstants& sc) {
    switch (k) {
        case StatKind::T: return t_stat(s, alpha, sc);
        case StatKind::L: return l_stat(s, alpha, sc);
        case StatKind::R: return r_stat(s, alpha, sc);
        case StatKind::Ttilde: return t_tilde(s, sc);
        case StatKind::Ltilde: return l_tilde(s, sc);
        case StatKind::Rtilde: return r_tilde(s, sc);
    }
    throw std::logic_error("evaluate_stat: bad kind");
}

}  // namespace condcov
