#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "condcov/copulas.hpp"
#include "condcov/pipeline.hpp"

// Seeded synthetic price panel with the shape of a small multi-asset desk
// data set: six metal-like series, weekday dates, prices driven by copula
// returns with standard normal margins.  Used for the bundled example data
// and for end-to-end tests.

namespace condcov {

namespace detail {

struct CivilDate {
    int y, m, d;

    static bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }
    static int days_in_month(int y, int m) {
        static const int dm[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        return (m == 2 && leap(y)) ? 29 : dm[m - 1];
    }
    void advance_one_day() {
        if (++d > days_in_month(y, m)) {
            d = 1;
            if (++m > 12) {
                m = 1;
                ++y;
            }
        }
    }
    // Sakamoto's day-of-week; 0 = Sunday.
    int weekday() const {
        static const int t[12] = {0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4};
        const int yy = y - (m < 3);
        return (yy + yy / 4 - yy / 100 + yy / 400 + t[m - 1] + d) % 7;
    }
    void advance_to_next_weekday() {
        do {
            advance_one_day();
        } while (weekday() == 0 || weekday() == 6);
    }
    std::string iso() const {
        char buf[11];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
        return buf;
    }
};

}  // namespace detail

/// Price panel of `rows` weekday observations for six synthetic metals.
/// family selects the dependence structure of the daily returns:
/// an exchangeable Student-t copula (nu=3, rho=0.5) or its Gaussian analogue.
inline Panel synthetic_prices_panel(CopulaFamily family, std::size_t rows,
                                    std::uint64_t seed) {
    if (family != CopulaFamily::Gaussian && family != CopulaFamily::StudentT)
        throw std::invalid_argument("synthetic_prices_panel: gaussian or student_t only");
    const std::size_t k = 6;
    const double rho = 0.5, nu = 3.0, vol = 0.014;
    const char* names[6] = {"al", "cu", "pb", "ni", "sn", "zn"};
    const double level0[6] = {2100.0, 7300.0, 2050.0, 18200.0, 19800.0, 2400.0};

    // Cholesky factor of the exchangeable correlation matrix
    Matrix L(k);
    {
        Matrix R(k);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) R(i, j) = i == j ? 1.0 : rho;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double s = R(i, j);
                for (std::size_t m = 0; m < j; ++m) s -= L(i, m) * L(j, m);
                L(i, j) = (i == j) ? std::sqrt(s) : s / L(j, j);
            }
        }
    }

    Panel p;
    p.names.assign(names, names + k);
    p.columns.assign(k, {});
    detail::CivilDate date{2015, 1, 2};
    std::vector<double> level(level0, level0 + k);
    Rng rng(seed, purpose::kFixture, static_cast<std::uint64_t>(family));
    std::vector<double> z(k), t(k);
    for (std::size_t row = 0; row < rows; ++row) {
        if (row > 0) {
            for (auto& v : z) v = rng.normal();
            for (std::size_t i = 0; i < k; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j <= i; ++j) s += L(i, j) * z[j];
                t[i] = s;
            }
            if (family == CopulaFamily::StudentT) {
                const double w = rng.chi_square(nu);
                const double scale = std::sqrt(nu / w);
                for (std::size_t i = 0; i < k; ++i)
                    t[i] = norm_quantile(detail::clamp_unit(student_t_cdf(t[i] * scale, nu)));
            }
            for (std::size_t i = 0; i < k; ++i) level[i] *= std::exp(vol * t[i]);
            date.advance_to_next_weekday();
        }
        p.dates.push_back(date.iso());
        for (std::size_t i = 0; i < k; ++i) {
            // round to cents-like precision so real-data ties appear
            const double rounded = std::floor(level[i] * 100.0 + 0.5) / 100.0;
            p.columns[i].push_back(rounded);
        }
    }
    return p;
}

/// Writes a price panel in the loader's CSV schema.
inline void write_panel_csv(const Panel& p, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "date";
    for (const auto& n : p.names) out << ',' << n;
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < p.rows(); ++i) {
        out << p.dates[i];
        for (std::size_t j = 0; j < p.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.2f", p.columns[j][i]);
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace condcov
