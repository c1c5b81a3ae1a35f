#include <catch2/catch_amalgamated.hpp>

#include "condcov/benchmark_tests.hpp"
#include "condcov/rng.hpp"
#include "support/oracles.hpp"

using namespace condcov;
using Catch::Approx;

namespace {

std::vector<std::vector<double>> random_columns(std::size_t n, std::size_t k,
                                                std::uint64_t seed) {
    Rng rng(seed, purpose::kOracle, 61);
    std::vector<std::vector<double>> cols(k, std::vector<double>(n));
    for (auto& c : cols)
        for (auto& v : c) v = rng.normal();
    return cols;
}

ScaledResiduals residuals_from_rows(const std::vector<std::array<double, 2>>& rows) {
    ScaledResiduals sr;
    sr.n = rows.size();
    sr.k = 2;
    for (const auto& r : rows) {
        sr.z.push_back(r[0]);
        sr.z.push_back(r[1]);
        sr.r2.push_back(r[0] * r[0] + r[1] * r[1]);
    }
    return sr;
}

double ms_double_sum(const ScaledResiduals& sr) {
    double acc = 0.0;
    for (std::size_t i = 0; i < sr.n; ++i)
        for (std::size_t j = 0; j < sr.n; ++j) {
            double dot = 0.0;
            for (std::size_t a = 0; a < sr.k; ++a) dot += sr.zv(i, a) * sr.zv(j, a);
            acc += dot * dot * dot;
        }
    return acc / (static_cast<double>(sr.n) * static_cast<double>(sr.n));
}

// exact piecewise integral of the Anderson-Darling functional
double ad_integral(const ScaledResiduals& sr) {
    std::vector<double> s(sr.r2);
    std::sort(s.begin(), s.end());
    for (double& v : s) v = chi2_cdf(v, static_cast<int>(sr.k));
    const std::size_t n = s.size();
    double acc = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double lo = i == 0 ? 0.0 : s[i - 1];
        const double hi = i == n ? 1.0 : s[i];
        if (hi <= lo) continue;
        const double c = static_cast<double>(i) / static_cast<double>(n);
        const auto G = [&](double x) {
            double g = -x;
            if (c > 0.0) g += c * c * std::log(x);
            if (c < 1.0) g -= (1.0 - c) * (1.0 - c) * std::log1p(-x);
            return g;
        };
        acc += G(hi) - G(lo);
    }
    return static_cast<double>(n) * acc;
}

double cm_integral(const ScaledResiduals& sr) {
    std::vector<double> s(sr.r2);
    std::sort(s.begin(), s.end());
    for (double& v : s) v = chi2_cdf(v, static_cast<int>(sr.k));
    const std::size_t n = s.size();
    double acc = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double lo = i == 0 ? 0.0 : s[i - 1];
        const double hi = i == n ? 1.0 : s[i];
        if (hi <= lo) continue;
        const double c = static_cast<double>(i) / static_cast<double>(n);
        acc += ((c - lo) * (c - lo) * (c - lo) - (c - hi) * (c - hi) * (c - hi)) / 3.0;
    }
    return static_cast<double>(n) * acc;
}

// brute-force 2-D quadrature of the characteristic-function distance
double bhep_quadrature(const ScaledResiduals& sr, double beta) {
    const auto& g = oracles::gauss_legendre_128();
    const double lim = 10.0;
    double acc = 0.0;
    for (int i = 0; i < 128; ++i) {
        const double t1 = lim * g.x[i];
        for (int j = 0; j < 128; ++j) {
            const double t2 = lim * g.x[j];
            double re = 0.0, im = 0.0;
            for (std::size_t r = 0; r < sr.n; ++r) {
                const double dot = t1 * sr.zv(r, 0) + t2 * sr.zv(r, 1);
                re += std::cos(dot);
                im += std::sin(dot);
            }
            re /= static_cast<double>(sr.n);
            im /= static_cast<double>(sr.n);
            const double t_sq = t1 * t1 + t2 * t2;
            const double diff_re = re - std::exp(-0.5 * t_sq);
            const double weight = std::exp(-0.5 * t_sq / (beta * beta)) /
                                  (2.0 * kPi * beta * beta);
            acc += g.w[i] * g.w[j] * (diff_re * diff_re + im * im) * weight * lim * lim;
        }
    }
    return acc;
}

}  // namespace

TEST_CASE("scaled residuals are centered and whitened", "[benchmarks]") {
    const auto cols = random_columns(300, 3, 1);
    const ScaledResiduals sr = scaled_residuals(cols);
    for (std::size_t a = 0; a < sr.k; ++a) {
        double m = 0.0;
        for (std::size_t i = 0; i < sr.n; ++i) m += sr.zv(i, a);
        CHECK(std::fabs(m / static_cast<double>(sr.n)) < 1e-10);
    }
    for (std::size_t a = 0; a < sr.k; ++a)
        for (std::size_t b = 0; b < sr.k; ++b) {
            double c = 0.0;
            for (std::size_t i = 0; i < sr.n; ++i) c += sr.zv(i, a) * sr.zv(i, b);
            c /= static_cast<double>(sr.n);
            CHECK(c == Approx(a == b ? 1.0 : 0.0).margin(1e-8));
        }
}

TEST_CASE("scaled residuals reduce to standardization for k=1", "[benchmarks]") {
    auto cols = random_columns(100, 1, 2);
    const ScaledResiduals sr = scaled_residuals(cols);
    double m = 0.0;
    for (double v : cols[0]) m += v;
    m /= 100.0;
    double var = 0.0;
    for (double v : cols[0]) var += (v - m) * (v - m);
    var /= 100.0;
    for (std::size_t i = 0; i < 100; ++i)
        CHECK(sr.zv(i, 0) == Approx((cols[0][i] - m) / std::sqrt(var)).margin(1e-12));
}

TEST_CASE("singular covariance is rejected", "[benchmarks]") {
    auto cols = random_columns(50, 1, 3);
    cols.push_back(cols[0]);  // duplicated column
    CHECK_THROWS_AS(scaled_residuals(cols), std::runtime_error);
}

TEST_CASE("all four statistics are affine invariant", "[benchmarks]") {
    const auto cols = random_columns(200, 2, 4);
    // random nonsingular affine map
    Rng rng(5, purpose::kOracle, 67);
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    do {
        a = rng.normal();
        b = rng.normal();
        c = rng.normal();
        d = rng.normal();
    } while (std::fabs(a * d - b * c) < 0.2);
    std::vector<std::vector<double>> mapped(2, std::vector<double>(200));
    for (std::size_t i = 0; i < 200; ++i) {
        mapped[0][i] = a * cols[0][i] + b * cols[1][i] + 3.5;
        mapped[1][i] = c * cols[0][i] + d * cols[1][i] - 1.25;
    }
    const ScaledResiduals s1 = scaled_residuals(cols);
    const ScaledResiduals s2 = scaled_residuals(mapped);
    // radii agree up to numerical error, hence so do the radius statistics
    std::vector<double> r1(s1.r2), r2(s2.r2);
    std::sort(r1.begin(), r1.end());
    std::sort(r2.begin(), r2.end());
    for (std::size_t i = 0; i < r1.size(); ++i)
        CHECK(r1[i] == Approx(r2[i]).margin(1e-8));
    CHECK(bhep(s1) == Approx(bhep(s2)).margin(1e-8));
    CHECK(ad(s1) == Approx(ad(s2)).margin(1e-8));
    CHECK(cm(s1) == Approx(cm(s2)).margin(1e-8));
    CHECK(ms(s1) == Approx(ms(s2)).margin(1e-8));
}

TEST_CASE("row order does not matter", "[benchmarks]") {
    auto cols = random_columns(150, 2, 6);
    auto shuffled = cols;
    Rng rng(6, purpose::kOracle, 71);
    for (std::size_t i = 149; i > 0; --i) {
        const std::size_t j = rng.next_u64() % (i + 1);
        std::swap(shuffled[0][i], shuffled[0][j]);
        std::swap(shuffled[1][i], shuffled[1][j]);
    }
    const ScaledResiduals s1 = scaled_residuals(cols);
    const ScaledResiduals s2 = scaled_residuals(shuffled);
    CHECK(bhep(s1) == Approx(bhep(s2)).epsilon(1e-12));
    CHECK(ad(s1) == Approx(ad(s2)).epsilon(1e-12));
    CHECK(cm(s1) == Approx(cm(s2)).epsilon(1e-12));
    CHECK(ms(s1) == Approx(ms(s2)).epsilon(1e-12));
}

TEST_CASE("bhep closed form equals the integral definition", "[benchmarks]") {
    // constructed residual sets, bypassing standardization
    const std::vector<std::vector<std::array<double, 2>>> cases = {
        {{1.0, 0.0}, {-1.0, 0.0}},
        {{0.7, -0.3}, {-0.7, 0.3}},
        {{1.2, 0.4}, {-0.5, -1.0}, {0.1, 0.9}},
    };
    for (const auto& rows : cases) {
        const ScaledResiduals sr = residuals_from_rows(rows);
        for (double beta : {1.0, 0.7}) {
            CHECK(bhep(sr, beta) == Approx(bhep_quadrature(sr, beta)).margin(1e-6));
        }
    }
}

TEST_CASE("bhep is nonnegative", "[benchmarks]") {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const ScaledResiduals sr = scaled_residuals(random_columns(60, 2, seed));
        CHECK(bhep(sr) >= 0.0);
    }
}

TEST_CASE("ad and cm closed forms equal their integral definitions", "[benchmarks]") {
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
        const ScaledResiduals sr = scaled_residuals(random_columns(20, 2, seed));
        CHECK(ad(sr) == Approx(ad_integral(sr)).margin(1e-6));
        CHECK(cm(sr) == Approx(cm_integral(sr)).margin(1e-6));
    }
}

namespace {
double chi2_quantile_newton(double p, int k) {
    double x = static_cast<double>(k);
    for (int it = 0; it < 200; ++it) {
        const double f = chi2_cdf(x, k) - p;
        const double dens = 0.5 * std::exp(-0.5 * x) *
                            std::pow(0.5 * x, 0.5 * k - 1.0) / std::tgamma(0.5 * k);
        const double step = f / std::max(dens, 1e-12);
        x = std::max(1e-8, x - step);
        if (std::fabs(step) < 1e-13 * (1.0 + x)) break;
    }
    return x;
}
}  // namespace

TEST_CASE("cm attains its floor when radii sit on the quantile grid", "[benchmarks]") {
    const std::size_t n = 15;
    ScaledResiduals sr;
    sr.n = n;
    sr.k = 2;
    sr.z.assign(n * 2, 0.0);  // unused by cm
    for (std::size_t i = 1; i <= n; ++i)
        sr.r2.push_back(chi2_quantile_newton((2.0 * i - 1.0) / (2.0 * n), 2));
    CHECK(cm(sr) == Approx(1.0 / (12.0 * n)).margin(1e-9));
}

TEST_CASE("ad at the uniform quantile spacing is small and positive", "[benchmarks]") {
    const std::size_t n = 25;
    ScaledResiduals sr;
    sr.n = n;
    sr.k = 2;
    sr.z.assign(n * 2, 0.0);
    for (std::size_t i = 1; i <= n; ++i)
        sr.r2.push_back(chi2_quantile_newton(static_cast<double>(i) / (n + 1.0), 2));
    const double v = ad(sr);
    CHECK(v > 0.0);
    CHECK(v < 0.6);
}

TEST_CASE("ad grows when the radii are inflated", "[benchmarks]") {
    ScaledResiduals sr = scaled_residuals(random_columns(40, 2, 50));
    ScaledResiduals inflated = sr;
    for (double& v : inflated.r2) v *= 10.0;
    CHECK(ad(inflated) > ad(sr));
}

TEST_CASE("ad and cm depend on the data only through the radii", "[benchmarks]") {
    ScaledResiduals sr = scaled_residuals(random_columns(80, 2, 51));
    ScaledResiduals rotated = sr;
    const double ct = std::cos(0.83), st = std::sin(0.83);
    for (std::size_t i = 0; i < sr.n; ++i) {
        rotated.z[i * 2] = ct * sr.zv(i, 0) - st * sr.zv(i, 1);
        rotated.z[i * 2 + 1] = st * sr.zv(i, 0) + ct * sr.zv(i, 1);
    }
    CHECK(ad(rotated) == Approx(ad(sr)).epsilon(1e-13));
    CHECK(cm(rotated) == Approx(cm(sr)).epsilon(1e-13));
}

TEST_CASE("mardia skewness hand cases", "[benchmarks]") {
    // point-symmetric set: odd moments cancel exactly
    const ScaledResiduals sym =
        residuals_from_rows({{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}});
    CHECK(ms(sym) == Approx(0.0).margin(1e-14));

    // explicit 9-term double sum: {(1,0),(0,1),(-1,-1)} -> 6/9
    const ScaledResiduals tri = residuals_from_rows({{1.0, 0.0}, {0.0, 1.0}, {-1.0, -1.0}});
    CHECK(ms(tri) == Approx(2.0 / 3.0).margin(1e-14));
    CHECK(ms(tri) == Approx(ms_double_sum(tri)).margin(1e-14));
}

TEST_CASE("mardia skewness equals the double sum and stays nonnegative", "[benchmarks]") {
    for (std::uint64_t seed = 60; seed < 66; ++seed) {
        const ScaledResiduals sr = scaled_residuals(random_columns(50, 2, seed));
        CHECK(ms(sr) == Approx(ms_double_sum(sr)).margin(1e-12));
        CHECK(ms(sr) >= -1e-12);
    }
}
