#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "condcov/copulas.hpp"
#include "condcov/moments.hpp"
#include "support/oracles.hpp"

using namespace condcov;
using Catch::Approx;

namespace {
const SplitConstants& constants() {
    static const SplitConstants sc = compute_constants();
    return sc;
}

BivariateSample normal_sample(std::size_t n, double rho, std::uint64_t seed) {
    Rng rng(seed, purpose::kOracle, 17);
    return sample(CopulaSpec{CopulaFamily::Gaussian, rho, 0.0, 0.0}, n, rng);
}
}  // namespace

TEST_CASE("benchmark is the loaded linear combination", "[moments]") {
    BivariateSample s;
    s.x1 = {1.0, 3.0};
    s.x2 = {2.0, -1.0};
    CHECK(benchmark(s, {1.0, 0.0}) == s.x1);
    const auto y = benchmark(s, {1.0, 1.0});
    CHECK(y[0] == 3.0);
    CHECK(y[1] == 2.0);
}

TEST_CASE("ordering is scale invariant and stable", "[moments]") {
    const BivariateSample s = normal_sample(500, 0.3, 1);
    const auto p1 = order_by_benchmark(s, {1.0, 1.0}).perm;
    const auto p2 = order_by_benchmark(s, {2.0, 2.0}).perm;
    CHECK(p1 == p2);

    // already sorted benchmark -> identity permutation
    BivariateSample inc;
    for (int i = 0; i < 10; ++i) {
        inc.x1.push_back(i);
        inc.x2.push_back(0.0);
    }
    const auto pid = order_by_benchmark(inc, {1.0, 1.0}).perm;
    for (std::uint32_t i = 0; i < 10; ++i) CHECK(pid[i] == i);

    // reversed benchmark -> reversing permutation
    BivariateSample dec;
    for (int i = 0; i < 10; ++i) {
        dec.x1.push_back(-i);
        dec.x2.push_back(0.0);
    }
    const auto prev = order_by_benchmark(dec, {1.0, 1.0}).perm;
    for (std::uint32_t i = 0; i < 10; ++i) CHECK(prev[i] == 9 - i);

    // benchmark values at the permutation are nondecreasing (vs naive sort)
    const auto y = benchmark(s, {1.0, 1.0});
    std::vector<double> sorted_y = y;
    std::sort(sorted_y.begin(), sorted_y.end());
    const auto os = order_by_benchmark(s, {1.0, 1.0});
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(y[os.perm[i]] == sorted_y[i]);
}

TEST_CASE("ordering permutation invariant under common affine margin maps", "[moments]") {
    const BivariateSample s = normal_sample(300, 0.0, 2);
    BivariateSample t;
    for (std::size_t i = 0; i < s.n(); ++i) {
        t.x1.push_back(2.5 * s.x1[i] + 1.0);
        t.x2.push_back(2.5 * s.x2[i] - 3.0);
    }
    CHECK(order_by_benchmark(s, {1.0, 1.0}).perm == order_by_benchmark(t, {1.0, 1.0}).perm);
}

TEST_CASE("cond_moments full split reproduces unconditional moments", "[moments]") {
    const BivariateSample s = normal_sample(257, 0.5, 3);
    const auto os = order_by_benchmark(s, {1.0, 1.0});
    const auto cm = cond_moments(os, {0.0, 1.0});
    CHECK(cm.m == s.n());
    // same summation order oracle: accumulate in permutation order
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < s.n(); ++i) {
        m1 += s.x1[os.perm[i]];
        m2 += s.x2[os.perm[i]];
    }
    m1 /= static_cast<double>(s.n());
    m2 /= static_cast<double>(s.n());
    double cov = 0.0;
    for (std::size_t i = 0; i < s.n(); ++i)
        cov += (s.x1[os.perm[i]] - m1) * (s.x2[os.perm[i]] - m2);
    cov /= static_cast<double>(s.n());
    CHECK(cm.mu1 == m1);
    CHECK(cm.mu2 == m2);
    CHECK(cm.r == cov);
}

TEST_CASE("cond_moments floor arithmetic", "[moments]") {
    BivariateSample s;
    s.x1 = {10.0, 20.0, 30.0, 40.0, 50.0};
    s.x2 = {1.0, 2.0, 3.0, 4.0, 5.0};
    const auto os = order_by_benchmark(s, {1.0, 0.0});
    const auto cm = cond_moments(os, {0.0, 0.4});  // floor(5*0.4) = 2 -> ranked 1..2
    CHECK(cm.m == 2);
    CHECK(cm.mu1 == Approx(15.0));
    CHECK(cm.mu2 == Approx(1.5));
    CHECK_THROWS_AS(cond_moments(os, {0.0, 0.2}), std::invalid_argument);  // m = 1
}

TEST_CASE("three bands partition the sample", "[moments]") {
    const double q = constants().q_tilde;
    for (std::size_t n : {21u, 100u, 997u, 12345u}) {
        const std::size_t i1 = detail::band_edge(n, q);
        const std::size_t i2 = detail::band_edge(n, 1.0 - q);
        CHECK(i1 + (i2 - i1) + (n - i2) == n);
        CHECK(i1 >= 1u);
        CHECK(n - i2 >= 1u);
    }
}

TEST_CASE("band conditional covariance matches the normal-theory value", "[moments]") {
    const double q = constants().q_tilde;
    const std::size_t n = 1'000'000;
    const BivariateSample s = normal_sample(n, 0.5, 4);
    const auto os = order_by_benchmark(s, {1.0, 1.0});
    const auto cm = cond_moments(os, {0.0, q});

    Matrix sigma(2);
    sigma(0, 0) = sigma(1, 1) = 1.0;
    sigma(0, 1) = sigma(1, 0) = 0.5;
    const Matrix theo = theoretical_cond_cov(sigma, {1.0, 1.0}, {0.0, q});
    CHECK(cm.r == Approx(theo(0, 1)).margin(0.005));
}

TEST_CASE("theoretical conditional covariance", "[moments]") {
    Matrix sigma(2);
    sigma(0, 0) = 2.0;
    sigma(1, 1) = 1.5;
    sigma(0, 1) = sigma(1, 0) = 0.7;

    // full split returns sigma unchanged
    const Matrix full = theoretical_cond_cov(sigma, {1.0, 1.0}, {0.0, 1.0});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(full(i, j) == Approx(sigma(i, j)).margin(1e-12));

    // identity sigma, alpha = (1,0): only the first margin shrinks
    Matrix eye(2);
    eye(0, 0) = eye(1, 1) = 1.0;
    const double q = constants().q_tilde;
    const Matrix tail = theoretical_cond_cov(eye, {1.0, 0.0}, {0.0, q});
    CHECK(tail(0, 1) == Approx(0.0).margin(1e-14));
    CHECK(tail(1, 1) == Approx(1.0).margin(1e-14));
    const double tail_var = lambda2(0.0, q) - lambda1(0.0, q) * lambda1(0.0, q);
    CHECK(tail(0, 0) == Approx(tail_var).margin(1e-12));

    // symmetric positive semidefinite across random inputs
    Rng rng(7, purpose::kOracle, 23);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix m(2);
        const double a = 0.5 + rng.uniform(), b = 0.5 + rng.uniform();
        const double r = (2.0 * rng.uniform() - 1.0) * 0.9 * std::sqrt(a * b);
        m(0, 0) = a;
        m(1, 1) = b;
        m(0, 1) = m(1, 0) = r;
        const double lo = rng.uniform() * 0.5;
        const double hi = std::min(lo + 0.05 + rng.uniform() * (1.0 - lo - 0.05), 1.0);
        LoadingFactor alpha{2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
        if (std::fabs(alpha.alpha1) + std::fabs(alpha.alpha2) < 0.1) alpha.alpha1 = 1.0;
        const Matrix c = theoretical_cond_cov(m, alpha, {lo, hi});
        CHECK(c(0, 1) == c(1, 0));
        const double tr = c(0, 0) + c(1, 1);
        const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(0, 1);
        CHECK(tr >= -1e-12);
        CHECK(det >= -1e-10);
    }
    CHECK_THROWS_AS(theoretical_cond_cov(sigma, {0.0, 0.0}, {0.0, 0.5}),
                    std::invalid_argument);
}

TEST_CASE("equilibrium gap vanishes for Gaussian samples", "[moments]") {
    const double q = constants().q_tilde;
    for (double rho : {-0.5, 0.0, 0.5}) {
        const BivariateSample s = normal_sample(1'000'000, rho, 5);
        CHECK(std::fabs(equilibrium_gap(s, {1.0, 1.0}, q)) < 0.01);
    }
}

TEST_CASE("equilibrium gap detects heavy joint tails", "[moments]") {
    const double q = constants().q_tilde;
    Rng rng(6, purpose::kOracle, 29);
    const BivariateSample s =
        sample(CopulaSpec{CopulaFamily::StudentT, 0.3, 3.0, 0.0}, 1'000'000, rng);
    CHECK(equilibrium_gap(s, {1.0, 1.0}, q) > 0.05);
}

TEST_CASE("duplicating every observation barely moves the gap", "[moments]") {
    // the band edges of the doubled sample can split one duplicate pair, so
    // the gap is not bit-identical, but the effect is O(1/n)
    const double q = constants().q_tilde;
    const BivariateSample s = normal_sample(2000, 0.2, 8);
    BivariateSample d;
    for (std::size_t i = 0; i < s.n(); ++i) {
        d.x1.insert(d.x1.end(), {s.x1[i], s.x1[i]});
        d.x2.insert(d.x2.end(), {s.x2[i], s.x2[i]});
    }
    const double g1 = equilibrium_gap(s, {1.0, 1.0}, q);
    const double g2 = equilibrium_gap(d, {1.0, 1.0}, q);
    CHECK(g2 == Approx(g1).margin(0.01));
}

TEST_CASE("conditional correlation matrices", "[moments]") {
    const double q = constants().q_tilde;

    // k = 2 reduction equals the bivariate band covariances, normalized
    const BivariateSample s = normal_sample(20000, 0.4, 9);
    const auto mats = conditional_corr_matrices({s.x1, s.x2}, {1.0, 1.0}, q);
    const auto os = order_by_benchmark(s, {1.0, 1.0});
    const QuantileSplit splits[3] = {{0.0, q}, {q, 1.0 - q}, {1.0 - q, 1.0}};
    for (int b = 0; b < 3; ++b) {
        const std::size_t lo = detail::band_edge(s.n(), splits[b].a);
        const std::size_t hi = detail::band_edge(s.n(), splits[b].b);
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            m1 += s.x1[os.perm[i]];
            m2 += s.x2[os.perm[i]];
        }
        const double m = static_cast<double>(hi - lo);
        m1 /= m;
        m2 /= m;
        double v1 = 0.0, v2 = 0.0, cv = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double d1 = s.x1[os.perm[i]] - m1, d2 = s.x2[os.perm[i]] - m2;
            v1 += d1 * d1;
            v2 += d2 * d2;
            cv += d1 * d2;
        }
        CHECK(mats[b](0, 1) == Approx(cv / std::sqrt(v1 * v2)).margin(1e-12));
    }

    // iid normal k=3: all three band matrices agree
    Rng rng(10, purpose::kOracle, 31);
    std::vector<std::vector<double>> cols(3, std::vector<double>(100000));
    for (auto& c : cols)
        for (auto& v : c) v = rng.normal();
    const auto m3 = conditional_corr_matrices(cols, {1.0, 1.0, 1.0}, q);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(std::fabs(m3[0](i, j) - m3[1](i, j)) < 0.02);
            CHECK(std::fabs(m3[2](i, j) - m3[1](i, j)) < 0.02);
        }

    // comonotone pair stays perfectly correlated in every band
    std::vector<std::vector<double>> co(2, std::vector<double>(5000));
    Rng rng2(11, purpose::kOracle, 37);
    for (std::size_t i = 0; i < co[0].size(); ++i) {
        co[0][i] = rng2.normal();
        co[1][i] = 3.0 * co[0][i] + 1.0;
    }
    const auto mc = conditional_corr_matrices(co, {1.0, 0.0}, q);
    for (int b = 0; b < 3; ++b) CHECK(mc[b](0, 1) == Approx(1.0).margin(1e-9));

    // degenerate column in a band
    std::vector<std::vector<double>> bad = co;
    std::fill(bad[1].begin(), bad[1].end(), 2.0);
    CHECK_THROWS_AS(conditional_corr_matrices(bad, {1.0, 0.0}, q), std::runtime_error);
}
