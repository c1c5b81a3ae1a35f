#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

// Special functions used across the library: standard normal pdf/cdf/quantile,
// regularized incomplete gamma/beta, chi-square and Student-t CDFs, truncated
// normal moments.  Everything is plain double precision with absolute error
// comfortably below the tolerances promised by the public API (1e-14 for the
// normal CDF, 1e-12 for quantile and chi-square).

namespace condcov {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

/// Upper tail P(Z > x), accurate in the far right tail.
inline double norm_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

namespace detail {

// Wichura's AS241 rational approximation, |error| ~ 1e-15.
inline double norm_quantile_as241(double p) {
    const double q = p - 0.5;
    double r, val;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        val = q *
              (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                    67265.770927008700853) * r + 45921.953931549871457) * r +
                  13731.693765509461125) * r + 1971.5909503065514427) * r +
                133.14166789178437745) * r + 3.387132872796366608) /
              (((((((5226.495278852545610 * r + 28729.085735721942674) * r +
                    39307.89580009271061) * r + 21213.794301586595867) * r +
                  5394.1960214247511077) * r + 687.1870074920579083) * r +
                42.313330701600911252) * r + 1.0);
        return val;
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                    0.24178072517745061177) * r + 1.27045825245236838258) * r +
                  3.64784832476320460504) * r + 5.7694972214606914055) * r +
                4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                    0.0151986665636164571966) * r + 0.14810397642748007459) * r +
                  0.68976733498510000455) * r + 1.6763848301838038494) * r +
                2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    0.0012426609473880784386) * r + 0.026532189526576123093) * r +
                  0.29656057182850489123) * r + 1.7848265399172913358) * r +
                5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                    1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
                  0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

}  // namespace detail

/// Inverse standard normal CDF.  AS241 seed plus one Newton polish; the
/// round trip through norm_cdf holds to better than 1e-12 on (0,1).
inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("norm_quantile: p must lie in (0,1)");
    double x = detail::norm_quantile_as241(p);
    if (p > 1e-10 && p < 1.0 - 1e-10) {
        // one Newton step; the tail evaluation uses sf to avoid cancellation
        const double err = p < 0.5 ? norm_cdf(x) - p : (1.0 - p) - norm_sf(x);
        x -= err / norm_pdf(x);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Regularized incomplete gamma P(a,x) (lower) via series / continued fraction.
// ---------------------------------------------------------------------------

namespace detail {

inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16)
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw std::runtime_error("gamma_p: series did not converge");
}

inline double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16)
            return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw std::runtime_error("gamma_q: continued fraction did not converge");
}

}  // namespace detail

inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::domain_error("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    return (x < a + 1.0) ? detail::gamma_p_series(a, x)
                         : 1.0 - detail::gamma_q_contfrac(a, x);
}

/// Chi-square CDF with k degrees of freedom.
inline double chi2_cdf(double x, int k) {
    if (k < 1) throw std::domain_error("chi2_cdf: k must be >= 1");
    if (x < 0.0) throw std::domain_error("chi2_cdf: x must be >= 0");
    if (k == 2) return -std::expm1(-0.5 * x);  // exponential special case
    return gamma_p(0.5 * k, 0.5 * x);
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta I_x(a,b) and the Student-t distribution.
// ---------------------------------------------------------------------------

namespace detail {

inline double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) return h;
    }
    throw std::runtime_error("betacf: did not converge");
}

}  // namespace detail

inline double beta_inc(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw std::domain_error("beta_inc: bad shape");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::betacf(a, b, x) / a;
    return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

inline double student_t_cdf(double t, double nu) {
    if (nu <= 0.0) throw std::domain_error("student_t_cdf: nu must be > 0");
    if (t == 0.0) return 0.5;
    const double x = nu / (nu + t * t);
    const double half_tail = 0.5 * beta_inc(0.5 * nu, 0.5, x);
    return t > 0.0 ? 1.0 - half_tail : half_tail;
}

inline double student_t_pdf(double t, double nu) {
    const double lc = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                      0.5 * std::log(nu * kPi);
    return std::exp(lc - 0.5 * (nu + 1.0) * std::log1p(t * t / nu));
}

/// Student-t quantile via Newton on the CDF with bisection safeguard.
inline double student_t_quantile(double p, double nu) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("student_t_quantile: p must lie in (0,1)");
    double lo = -1e10, hi = 1e10;
    double t = norm_quantile(p);  // decent start for all nu
    for (int it = 0; it < 100; ++it) {
        const double f = student_t_cdf(t, nu) - p;
        if (f > 0.0) hi = std::min(hi, t); else lo = std::max(lo, t);
        const double dens = student_t_pdf(t, nu);
        double step = dens > 1e-300 ? f / dens : 0.0;
        double next = t - step;
        if (!(next > lo && next < hi) || step == 0.0) next = 0.5 * (lo + hi);
        if (std::fabs(next - t) < 1e-13 * (1.0 + std::fabs(t))) return next;
        t = next;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Truncated standard normal raw moments.
// ---------------------------------------------------------------------------

/// Raw moments I_k = int_lo^hi v^k phi(v) dv for k = 0..kmax (kmax <= 8),
/// using I_k = (k-1) I_{k-2} + lo^{k-1} phi(lo) - hi^{k-1} phi(hi).
/// Infinite endpoints are allowed.
template <int KMax = 4>
inline std::array<double, KMax + 1> trunc_norm_moments(double lo, double hi) {
    static_assert(KMax >= 1 && KMax <= 8);
    const bool flo = std::isfinite(lo), fhi = std::isfinite(hi);
    const double plo = flo ? norm_pdf(lo) : 0.0;
    const double phi_ = fhi ? norm_pdf(hi) : 0.0;
    const double Flo = flo ? norm_cdf(lo) : 0.0;
    const double Fhi = fhi ? norm_cdf(hi) : 1.0;
    std::array<double, KMax + 1> I{};
    I[0] = Fhi - Flo;
    I[1] = plo - phi_;
    double lp = plo, hp = phi_;  // lo^{k-1} phi(lo), hi^{k-1} phi(hi)
    for (int k = 2; k <= KMax; ++k) {
        lp = flo ? lp * lo : 0.0;
        hp = fhi ? hp * hi : 0.0;
        I[k] = (k - 1) * I[k - 2] + lp - hp;
    }
    return I;
}

/// Survival function of the Kolmogorov distribution, Q(lambda) = P(K > lambda).
inline double kolmogorov_sf(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 == 1) ? term : -term;
        if (term < 1e-16) break;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

}  // namespace condcov
