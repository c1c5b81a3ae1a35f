#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "condcov/moments.hpp"
#include "condcov/rng.hpp"
#include "condcov/special.hpp"

// Copula families for the null and the alternative hypotheses.  Sampling uses
// the linear-transform construction for the elliptical families and the
// conditional-distribution method everywhere else (analytic conditional
// inverse for Frank, bracketed bisection on dC/du for the rest).  All samples
// are returned with standard normal margins.

namespace condcov {

enum class CopulaFamily { Gaussian, StudentT, Frank, Gumbel, Joe, Galambos, HuslerReiss };

struct CopulaSpec {
    CopulaFamily family = CopulaFamily::Gaussian;
    double rho = 0.0;    // Gaussian / StudentT
    double nu = 0.0;     // StudentT
    double theta = 0.0;  // Archimedean / extreme-value families

    void validate() const {
        switch (family) {
            case CopulaFamily::Gaussian:
                if (!(rho > -1.0 && rho < 1.0))
                    throw std::invalid_argument("gaussian copula: rho must be in (-1,1)");
                break;
            case CopulaFamily::StudentT:
                if (!(rho > -1.0 && rho < 1.0))
                    throw std::invalid_argument("t copula: rho must be in (-1,1)");
                if (!(nu > 0.0)) throw std::invalid_argument("t copula: nu must be > 0");
                break;
            case CopulaFamily::Frank:
                if (theta == 0.0) throw std::invalid_argument("frank copula: theta must be nonzero");
                break;
            case CopulaFamily::Gumbel:
            case CopulaFamily::Joe:
                if (!(theta >= 1.0))
                    throw std::invalid_argument("gumbel/joe copula: theta must be >= 1");
                break;
            case CopulaFamily::Galambos:
            case CopulaFamily::HuslerReiss:
                if (!(theta > 0.0))
                    throw std::invalid_argument("galambos/husler-reiss copula: theta must be > 0");
                break;
        }
    }
};

inline const char* family_name(CopulaFamily f) {
    switch (f) {
        case CopulaFamily::Gaussian: return "gaussian";
        case CopulaFamily::StudentT: return "student_t";
        case CopulaFamily::Frank: return "frank";
        case CopulaFamily::Gumbel: return "gumbel";
        case CopulaFamily::Joe: return "joe";
        case CopulaFamily::Galambos: return "galambos";
        case CopulaFamily::HuslerReiss: return "husler_reiss";
    }
    return "?";
}

inline CopulaFamily family_from_name(const std::string& s) {
    if (s == "gaussian") return CopulaFamily::Gaussian;
    if (s == "student_t") return CopulaFamily::StudentT;
    if (s == "frank") return CopulaFamily::Frank;
    if (s == "gumbel") return CopulaFamily::Gumbel;
    if (s == "joe") return CopulaFamily::Joe;
    if (s == "galambos") return CopulaFamily::Galambos;
    if (s == "husler_reiss") return CopulaFamily::HuslerReiss;
    throw std::invalid_argument("unknown copula family: " + s);
}

namespace detail {

inline constexpr double kUnitClamp = 1e-12;

inline double clamp_unit(double u) {
    return std::min(1.0 - kUnitClamp, std::max(kUnitClamp, u));
}

// --- conditional CDFs h(u,v) = dC/du ---------------------------------------

inline double h_frank(double u, double v, double th) {
    const double eu = std::exp(-th * u), ev = std::exp(-th * v);
    return eu * (ev - 1.0) / ((std::exp(-th) - 1.0) + (eu - 1.0) * (ev - 1.0));
}

inline double h_gumbel(double u, double v, double th) {
    const double lu = -std::log(u), lv = -std::log(v);
    const double s = std::pow(std::pow(lu, th) + std::pow(lv, th), 1.0 / th);
    return std::exp(-s) * std::pow(s, 1.0 - th) * std::pow(lu, th - 1.0) / u;
}

inline double h_joe(double u, double v, double th) {
    const double x = std::pow(1.0 - u, th), y = std::pow(1.0 - v, th);
    const double s = x + y - x * y;
    return std::pow(1.0 - u, th - 1.0) * (1.0 - y) * std::pow(s, 1.0 / th - 1.0);
}

inline double h_galambos(double u, double v, double th) {
    const double lu = -std::log(u), lv = -std::log(v);
    const double S = std::pow(std::pow(lu, -th) + std::pow(lv, -th), -1.0 / th);
    const double C = u * v * std::exp(S);
    return C / u * (1.0 - std::pow(S / lu, th + 1.0));
}

inline double h_husler_reiss(double u, double v, double th) {
    const double lu = -std::log(u), lv = -std::log(v);
    const double zu = 1.0 / th + 0.5 * th * std::log(lu / lv);
    const double zv = 1.0 / th + 0.5 * th * std::log(lv / lu);
    const double C = std::exp(-lu * norm_cdf(zu) - lv * norm_cdf(zv));
    return C / u * norm_cdf(zu);
}

inline double h_gaussian(double u, double v, double rho) {
    return norm_cdf((norm_quantile(v) - rho * norm_quantile(u)) /
                    std::sqrt(1.0 - rho * rho));
}

inline double h_student_t(double u, double v, double rho, double nu) {
    const double tu = student_t_quantile(u, nu), tv = student_t_quantile(v, nu);
    const double scale = std::sqrt((nu + tu * tu) * (1.0 - rho * rho) / (nu + 1.0));
    return student_t_cdf((tv - rho * tu) / scale, nu + 1.0);
}

inline double h_value(const CopulaSpec& c, double u, double v) {
    u = clamp_unit(u);
    v = clamp_unit(v);
    switch (c.family) {
        case CopulaFamily::Gaussian: return h_gaussian(u, v, c.rho);
        case CopulaFamily::StudentT: return h_student_t(u, v, c.rho, c.nu);
        case CopulaFamily::Frank: return h_frank(u, v, c.theta);
        case CopulaFamily::Gumbel: return h_gumbel(u, v, c.theta);
        case CopulaFamily::Joe: return h_joe(u, v, c.theta);
        case CopulaFamily::Galambos: return h_galambos(u, v, c.theta);
        case CopulaFamily::HuslerReiss: return h_husler_reiss(u, v, c.theta);
    }
    throw std::logic_error("h_value: bad family");
}

// 64-point Gauss-Legendre nodes/weights on [-1,1] built once from Newton
// iteration on Legendre polynomials.
struct GaussLegendre64 {
    double x[64];
    double w[64];
    GaussLegendre64() {
        const int n = 64;
        for (int i = 0; i < n / 2; ++i) {
            double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
                }
                pp = n * (z * p0 - p1) / (z * z - 1.0);
                const double z1 = z;
                z = z1 - p0 / pp;
                if (std::fabs(z - z1) < 1e-15) break;
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
        }
    }
};

inline const GaussLegendre64& gl64() {
    static const GaussLegendre64 g;
    return g;
}

inline double cdf_gaussian(double u, double v, double rho) {
    // integral of the bivariate normal density over the correlation parameter
    const double h = norm_quantile(u), k = norm_quantile(v);
    double acc = 0.0;
    const auto& g = gl64();
    for (int i = 0; i < 64; ++i) {
        const double r = 0.5 * rho * (g.x[i] + 1.0);
        const double om = 1.0 - r * r;
        acc += g.w[i] * std::exp(-0.5 * (h * h - 2.0 * r * h * k + k * k) / om) /
               std::sqrt(om);
    }
    return u * v + acc * 0.5 * rho / (2.0 * kPi);
}

inline double cdf_student_t(double u, double v, double rho, double nu) {
    // C(u,v) = int_0^u P(V <= v | U = s) ds with the t-copula conditional law
    const auto& g = gl64();
    double acc = 0.0;
    for (int i = 0; i < 64; ++i) {
        const double s = clamp_unit(0.5 * u * (g.x[i] + 1.0));
        acc += g.w[i] * h_student_t(s, v, rho, nu);
    }
    return acc * 0.5 * u;
}

}  // namespace detail

/// Copula CDF per the family formulas; boundary cases handled exactly.
inline double copula_cdf(const CopulaSpec& c, double u, double v) {
    c.validate();
    if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
        throw std::domain_error("copula_cdf: u,v must lie in [0,1]");
    if (u == 0.0 || v == 0.0) return 0.0;
    if (u == 1.0) return v;
    if (v == 1.0) return u;
    const double uc = detail::clamp_unit(u), vc = detail::clamp_unit(v);
    switch (c.family) {
        case CopulaFamily::Gaussian:
            return detail::cdf_gaussian(uc, vc, c.rho);
        case CopulaFamily::StudentT:
            return detail::cdf_student_t(uc, vc, c.rho, c.nu);
        case CopulaFamily::Frank: {
            const double th = c.theta;
            return -std::log1p((std::expm1(-th * uc)) * (std::expm1(-th * vc)) /
                               std::expm1(-th)) / th;
        }
        case CopulaFamily::Gumbel: {
            const double lu = -std::log(uc), lv = -std::log(vc);
            return std::exp(-std::pow(std::pow(lu, c.theta) + std::pow(lv, c.theta),
                                      1.0 / c.theta));
        }
        case CopulaFamily::Joe: {
            const double x = std::pow(1.0 - uc, c.theta), y = std::pow(1.0 - vc, c.theta);
            return 1.0 - std::pow(x + y - x * y, 1.0 / c.theta);
        }
        case CopulaFamily::Galambos: {
            const double lu = -std::log(uc), lv = -std::log(vc);
            return uc * vc *
                   std::exp(std::pow(std::pow(lu, -c.theta) + std::pow(lv, -c.theta),
                                     -1.0 / c.theta));
        }
        case CopulaFamily::HuslerReiss: {
            const double lu = -std::log(uc), lv = -std::log(vc);
            const double zu = 1.0 / c.theta + 0.5 * c.theta * std::log(lu / lv);
            const double zv = 1.0 / c.theta + 0.5 * c.theta * std::log(lv / lu);
            return std::exp(-lu * norm_cdf(zu) - lv * norm_cdf(zv));
        }
    }
    throw std::logic_error("copula_cdf: bad family");
}

/// v solving dC/du(u, v) = p; analytic where available, bisection otherwise.
inline double conditional_quantile(const CopulaSpec& c, double u, double p) {
    c.validate();
    if (!(u > 0.0 && u < 1.0 && p > 0.0 && p < 1.0))
        throw std::domain_error("conditional_quantile: u,p must lie in (0,1)");
    u = detail::clamp_unit(u);
    switch (c.family) {
        case CopulaFamily::Gaussian:
            return norm_cdf(c.rho * norm_quantile(u) +
                            std::sqrt(1.0 - c.rho * c.rho) * norm_quantile(p));
        case CopulaFamily::StudentT: {
            const double tu = student_t_quantile(u, c.nu);
            const double scale = std::sqrt((c.nu + tu * tu) * (1.0 - c.rho * c.rho) /
                                           (c.nu + 1.0));
            const double tv = c.rho * tu + scale * student_t_quantile(p, c.nu + 1.0);
            return student_t_cdf(tv, c.nu);
        }
        case CopulaFamily::Frank: {
            const double eu = std::exp(-c.theta * u);
            return -std::log1p(p * std::expm1(-c.theta) / (eu + p * (1.0 - eu))) / c.theta;
        }
        default: {
            double lo = detail::kUnitClamp, hi = 1.0 - detail::kUnitClamp;
            if (detail::h_value(c, u, hi) <= p) return hi;
            if (detail::h_value(c, u, lo) >= p) return lo;
            for (int it = 0; it < 60 && hi - lo > 1e-14; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (detail::h_value(c, u, mid) < p) lo = mid;
                else hi = mid;
            }
            return 0.5 * (lo + hi);
        }
    }
}

/// One (U,V) pair from the copula, then mapped to standard normal margins.
inline void sample_point(const CopulaSpec& c, Rng& rng, double& x1, double& x2) {
    switch (c.family) {
        case CopulaFamily::Gaussian: {
            const double z1 = rng.normal(), z2 = rng.normal();
            x1 = z1;
            x2 = c.rho * z1 + std::sqrt(1.0 - c.rho * c.rho) * z2;
            return;
        }
        case CopulaFamily::StudentT: {
            const double z1 = rng.normal(), z2 = rng.normal();
            const double w = rng.chi_square(c.nu);
            const double scale = std::sqrt(c.nu / w);
            const double t1 = z1 * scale;
            const double t2 = (c.rho * z1 + std::sqrt(1.0 - c.rho * c.rho) * z2) * scale;
            x1 = norm_quantile(detail::clamp_unit(student_t_cdf(t1, c.nu)));
            x2 = norm_quantile(detail::clamp_unit(student_t_cdf(t2, c.nu)));
            return;
        }
        default: {
            const double u = rng.uniform();
            const double p = rng.uniform();
            const double v = conditional_quantile(c, u, p);
            x1 = norm_quantile(detail::clamp_unit(u));
            x2 = norm_quantile(detail::clamp_unit(v));
            return;
        }
    }
}

inline BivariateSample sample(const CopulaSpec& c, std::size_t n, Rng& rng) {
    c.validate();
    BivariateSample s;
    s.x1.resize(n);
    s.x2.resize(n);
    for (std::size_t i = 0; i < n; ++i) sample_point(c, rng, s.x1[i], s.x2[i]);
    return s;
}

inline BivariateSample sample(const CopulaSpec& c, std::size_t n, std::uint64_t seed) {
    Rng rng(seed, purpose::kOracle, 0);
    return sample(c, n, rng);
}

}  // namespace condcov
