#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "condcov/special.hpp"

// Numerical constants behind the 20/60/20 split: the split probability
// q_tilde, conditional moments of the standard normal on the three bands, and
// the variance constants that normalize the test statistics.
//
// The split bands over v = Phi^{-1}(p) are
//   band 0: (-inf, a~),  band 1: (a~, -a~),  band 2: (-a~, +inf),
// with a~ = Phi^{-1}(q_tilde) < 0.  q_tilde is defined operationally: the
// probability for which the conditional variance on the lower band equals the
// conditional variance on the central band.  The variance constants c1/c1_t
// come from the influence-function representation of the band-trimmed moment
// estimators; they are evaluated exactly through truncated-normal moments
// (quadrature appears only in tests).

namespace condcov {

/// Conditional mean of a standard normal between its a- and b-quantiles.
inline double lambda1(double a, double b) {
    if (!(a >= 0.0 && a < b && b <= 1.0))
        throw std::domain_error("lambda1: need 0 <= a < b <= 1");
    const double lo = a > 0.0 ? norm_quantile(a) : -std::numeric_limits<double>::infinity();
    const double hi = b < 1.0 ? norm_quantile(b) : std::numeric_limits<double>::infinity();
    return trunc_norm_moments<1>(lo, hi)[1] / (b - a);
}

/// Conditional second moment on the same band.
inline double lambda2(double a, double b) {
    if (!(a >= 0.0 && a < b && b <= 1.0))
        throw std::domain_error("lambda2: need 0 <= a < b <= 1");
    const double lo = a > 0.0 ? norm_quantile(a) : -std::numeric_limits<double>::infinity();
    const double hi = b < 1.0 ? norm_quantile(b) : std::numeric_limits<double>::infinity();
    return trunc_norm_moments<2>(lo, hi)[2] / (b - a);
}

/// Conditional k-th moment (k = 3 or 4) on an arbitrary quantile band.
inline double band_moment(int k, double a, double b) {
    if (k != 3 && k != 4) throw std::domain_error("band_moment: k must be 3 or 4");
    if (!(a >= 0.0 && a < b && b <= 1.0))
        throw std::domain_error("band_moment: need 0 <= a < b <= 1");
    const double lo = a > 0.0 ? norm_quantile(a) : -std::numeric_limits<double>::infinity();
    const double hi = b < 1.0 ? norm_quantile(b) : std::numeric_limits<double>::infinity();
    const auto I = trunc_norm_moments<4>(lo, hi);
    return I[k] / (b - a);
}

namespace detail {

/// Variance-equality defect at split probability q (zero at q_tilde).
inline double split_defect(double q) {
    const double l1 = lambda1(0.0, q);
    const double l2 = lambda2(0.0, q);
    return (l2 - l1 * l1) - lambda2(q, 1.0 - q);
}

}  // namespace detail

/// Solves for the split probability on (0, 0.5): bisection bracket, secant
/// polish.  Throws if the residual tolerance cannot be met.
inline double solve_q_tilde(double tol = 1e-13, int max_iter = 200) {
    double lo = 0.02, hi = 0.48;
    double flo = detail::split_defect(lo), fhi = detail::split_defect(hi);
    if (flo * fhi > 0.0) throw std::runtime_error("solve_q_tilde: root not bracketed");
    double mid = 0.5 * (lo + hi);
    for (int i = 0; i < max_iter; ++i) {
        mid = 0.5 * (lo + hi);
        const double fm = detail::split_defect(mid);
        if ((flo < 0.0) != (fm < 0.0)) { hi = mid; fhi = fm; }
        else { lo = mid; flo = fm; }
        if (hi - lo < 4e-17) break;
    }
    // secant polish on the last bracket
    double x0 = lo, x1 = hi, f0 = flo, f1 = fhi;
    for (int i = 0; i < 8 && f1 != f0; ++i) {
        const double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if (!(x2 > 0.0 && x2 < 0.5)) break;
        x0 = x1; f0 = f1;
        x1 = x2; f1 = detail::split_defect(x2);
    }
    const double q = std::fabs(f1) <= std::fabs(f0) ? x1 : x0;
    if (std::fabs(detail::split_defect(q)) > tol)
        throw std::runtime_error("solve_q_tilde: residual tolerance not met");
    return q;
}

// ---------------------------------------------------------------------------
// Piecewise-quadratic influence functions over the three bands.
// ---------------------------------------------------------------------------

namespace detail {

/// A function of v that is polynomial (degree <= 4) on each of the three
/// regions cut at a~ and -a~.
struct PiecewisePoly {
    std::array<std::array<double, 5>, 3> c{};  // [region][power]

    PiecewisePoly& axpy(double s, const PiecewisePoly& o) {
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 5; ++k) c[r][k] += s * o.c[r][k];
        return *this;
    }
    PiecewisePoly times(const PiecewisePoly& o) const {
        PiecewisePoly out;
        for (int r = 0; r < 3; ++r)
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j + i < 5; ++j)
                    out.c[r][i + j] += c[r][i] * o.c[r][j];
        return out;
    }
};

struct BandGeometry {
    double q;       // split probability
    double a;       // Phi^{-1}(q), negative
    std::array<std::array<double, 9>, 3> I;  // truncated raw moments per region

    explicit BandGeometry(double q_tilde) : q(q_tilde), a(norm_quantile(q_tilde)) {
        const double inf = std::numeric_limits<double>::infinity();
        I[0] = trunc_norm_moments<8>(-inf, a);
        I[1] = trunc_norm_moments<8>(a, -a);
        I[2] = trunc_norm_moments<8>(-a, inf);
    }

    double width(int band) const { return band == 1 ? 1.0 - 2.0 * q : q; }

    double expect(const PiecewisePoly& p) const {
        double tot = 0.0;
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 5; ++k) tot += p.c[r][k] * I[r][k];
        return tot;
    }

    /// Influence function of the band-trimmed mean of v^h (h = 1 or 2),
    /// normalized by the band width; quantile-error corrections included.
    PiecewisePoly influence(int band, int h) const {
        const double w = width(band);
        const double mu = I[band][h] / w;
        const double ha = h == 1 ? a : a * a;    // v^h at the lower split point
        const double hb = h == 1 ? -a : a * a;   // and at the upper one
        PiecewisePoly p;
        if (band == 0) {
            p.c[0][h] = 1.0 / q;
            p.c[0][0] = (-q * mu + ha * (q - 1.0)) / q;
            p.c[1][0] = p.c[2][0] = ha - mu;
        } else if (band == 1) {
            p.c[0][0] = (-w * mu + ha * (1.0 - q) - hb * q) / w;
            p.c[1][h] = 1.0 / w;
            p.c[1][0] = (-w * mu - q * (ha + hb)) / w;
            p.c[2][0] = (-w * mu - ha * q + hb * (1.0 - q)) / w;
        } else {
            p.c[0][0] = p.c[1][0] = hb - mu;
            p.c[2][h] = 1.0 / q;
            p.c[2][0] = (-q * mu - (1.0 - q) * hb) / q;
        }
        return p;
    }

    /// Influence function of the band conditional variance estimator.
    PiecewisePoly variance_influence(int band) const {
        const double l1 = I[band][1] / width(band);
        PiecewisePoly p = influence(band, 2);
        p.axpy(-2.0 * l1, influence(band, 1));
        return p;
    }

    /// Band indicator divided by the band width (for the W-driven terms).
    PiecewisePoly scaled_indicator(int band) const {
        PiecewisePoly p;
        p.c[band][0] = 1.0 / width(band);
        return p;
    }
};

}  // namespace detail

/// Conditional k-th moment (k in {3,4}) on the lower q_tilde tail.
inline double tail_moment(int k, double q_tilde) {
    return band_moment(k, 0.0, q_tilde);
}

/// All 20/60/20-derived constants.
struct SplitConstants {
    double q_tilde = 0.0;
    double x_tilde = 0.0;       // Phi^{-1}(q_tilde)
    double lambda1_tail = 0.0;  // E[V | lower band]
    double lambda2_tail = 0.0;  // E[V^2 | lower band]
    double xi_tail = 0.0;       // E[V^3 | lower band]
    double kappa_tail = 0.0;    // E[V^4 | lower band]
    double lambda2_mid = 0.0;   // E[V^2 | central band]

    // symmetric statistic: Var components and combined constants
    double c1 = 0.0, c2 = 0.0, c3 = 0.0;
    double k1 = 0.0, k2 = 0.0, k3 = 0.0;
    // one-sided analogues
    double c1_t = 0.0, c2_t = 0.0, c3_t = 0.0;
    double k1_t = 0.0, k2_t = 0.0, k3_t = 0.0;
};

inline SplitConstants compute_constants(double root_tol = 1e-13) {
    SplitConstants sc;
    sc.q_tilde = solve_q_tilde(root_tol);
    const detail::BandGeometry geo(sc.q_tilde);
    sc.x_tilde = geo.a;
    const double q = sc.q_tilde;
    sc.lambda1_tail = geo.I[0][1] / q;
    sc.lambda2_tail = geo.I[0][2] / q;
    sc.xi_tail = geo.I[0][3] / q;
    sc.kappa_tail = geo.I[0][4] / q;
    sc.lambda2_mid = geo.I[1][2] / (1.0 - 2.0 * q);

    // V-driven component: gap of band variance estimators
    detail::PiecewisePoly gap = geo.variance_influence(0);
    gap.axpy(-2.0, geo.variance_influence(1));
    gap.axpy(1.0, geo.variance_influence(2));
    sc.c1 = geo.expect(gap.times(gap));

    detail::PiecewisePoly gap_l = geo.variance_influence(0);
    gap_l.axpy(-1.0, geo.variance_influence(1));
    sc.c1_t = geo.expect(gap_l.times(gap_l));

    const double tail_var = sc.lambda2_tail - sc.lambda1_tail * sc.lambda1_tail;
    sc.c2 = 2.0 * tail_var / q + 4.0 * sc.lambda2_mid / (1.0 - 2.0 * q);
    sc.c3 = 4.0 / q + 8.0 / (1.0 - 2.0 * q);
    sc.c2_t = tail_var / q + sc.lambda2_mid / (1.0 - 2.0 * q);
    sc.c3_t = 2.0 * (1.0 - q) / (q * (1.0 - 2.0 * q));

    sc.k1 = sc.c1 - 4.0 * sc.c2 + sc.c3;
    sc.k2 = sc.c2 - sc.c3;
    sc.k3 = sc.c3;
    sc.k1_t = sc.c1_t - 4.0 * sc.c2_t + sc.c3_t;
    sc.k2_t = sc.c2_t - sc.c3_t;
    sc.k3_t = sc.c3_t;
    return sc;
}

/// Internal-consistency residuals; all analytic, evaluated in well under a
/// second.  Each entry should be tiny for a healthy build.
struct ConstantsDiagnostics {
    double root_residual = 0.0;        // variance-equality defect at q_tilde
    double stationarity_residual = 0.0;  // -x Phi(x) - phi(x)(1 - 2 Phi(x)) at x_tilde
    double fixed_point_delta = 0.0;    // re-solve at 10x tighter tolerance
    double lambda1_full = 0.0;         // lambda1(0,1), exactly 0 in theory
    double lambda2_full_minus_1 = 0.0;
    double kurtosis_full_minus_3 = 0.0;
    double k_identity = 0.0;           // k1 - (c1 - 4 c2 + c3)
    double c2_route_delta = 0.0;       // closed form vs influence machinery
    double c3_route_delta = 0.0;
    double c2_t_route_delta = 0.0;
    double c3_t_route_delta = 0.0;

    double max_abs() const {
        double m = 0.0;
        for (double v : {root_residual, stationarity_residual, fixed_point_delta,
                         lambda1_full, lambda2_full_minus_1, kurtosis_full_minus_3,
                         k_identity, c2_route_delta, c3_route_delta,
                         c2_t_route_delta, c3_t_route_delta})
            m = std::max(m, std::fabs(v));
        return m;
    }
};

inline ConstantsDiagnostics check_constants(const SplitConstants& sc) {
    ConstantsDiagnostics d;
    d.root_residual = detail::split_defect(sc.q_tilde);
    const double x = sc.x_tilde;
    d.stationarity_residual = -x * norm_cdf(x) - norm_pdf(x) * (1.0 - 2.0 * norm_cdf(x));
    d.fixed_point_delta = solve_q_tilde(1e-14) - sc.q_tilde;
    d.lambda1_full = lambda1(0.0, 1.0);
    d.lambda2_full_minus_1 = lambda2(0.0, 1.0) - 1.0;
    d.kurtosis_full_minus_3 = band_moment(4, 0.0, 1.0) - 3.0;
    d.k_identity = sc.k1 - (sc.c1 - 4.0 * sc.c2 + sc.c3);

    // c2/c3 have closed forms; recompute them through the same influence
    // machinery that produces c1 and compare.  The W-driven components factor:
    // E[(h(V) W)^2] = E[h^2] and E[(h(V)(W^2-1))^2] = 2 E[h^2].
    const detail::BandGeometry geo(sc.q_tilde);
    auto covariance_influence = [&](int band) {
        const double l1 = geo.I[band][1] / geo.width(band);
        detail::PiecewisePoly p;
        p.c[band][1] = 1.0 / geo.width(band);
        p.c[band][0] = -l1 / geo.width(band);
        return p;
    };
    detail::PiecewisePoly h2 = covariance_influence(0);
    h2.axpy(-2.0, covariance_influence(1));
    h2.axpy(1.0, covariance_influence(2));
    d.c2_route_delta = geo.expect(h2.times(h2)) - sc.c2;
    detail::PiecewisePoly h2l = covariance_influence(0);
    h2l.axpy(-1.0, covariance_influence(1));
    d.c2_t_route_delta = geo.expect(h2l.times(h2l)) - sc.c2_t;

    detail::PiecewisePoly h3 = geo.scaled_indicator(0);
    h3.axpy(-2.0, geo.scaled_indicator(1));
    h3.axpy(1.0, geo.scaled_indicator(2));
    d.c3_route_delta = 2.0 * geo.expect(h3.times(h3)) - sc.c3;
    detail::PiecewisePoly h3l = geo.scaled_indicator(0);
    h3l.axpy(-1.0, geo.scaled_indicator(1));
    d.c3_t_route_delta = 2.0 * geo.expect(h3l.times(h3l)) - sc.c3_t;
    return d;
}

}  // namespace condcov
