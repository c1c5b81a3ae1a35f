#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

// Minimal dense symmetric-matrix helpers for the small (k <= ~10) problems in
// this library: cyclic Jacobi eigendecomposition and the symmetric inverse
// square root built from it.

namespace condcov {

struct Matrix {
    std::size_t n = 0;
    std::vector<double> a;  // row-major n x n

    Matrix() = default;
    explicit Matrix(std::size_t dim) : n(dim), a(dim * dim, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

    static Matrix identity(std::size_t dim) {
        Matrix m(dim);
        for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }
};

struct EigenSym {
    std::vector<double> values;
    Matrix vectors;  // columns are eigenvectors
};

/// Cyclic Jacobi for symmetric matrices; plenty for the small k used here.
inline EigenSym eigen_sym(Matrix m) {
    const std::size_t n = m.n;
    Matrix v = Matrix::identity(n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(m(p, q)) < 1e-300) continue;
                const double theta = 0.5 * (m(q, q) - m(p, p)) / m(p, q);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double mip = m(i, p), miq = m(i, q);
                    m(i, p) = c * mip - s * miq;
                    m(i, q) = s * mip + c * miq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double mpj = m(p, j), mqj = m(q, j);
                    m(p, j) = c * mpj - s * mqj;
                    m(q, j) = s * mpj + c * mqj;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    EigenSym e;
    e.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) e.values[i] = m(i, i);
    e.vectors = std::move(v);
    return e;
}

/// Symmetric inverse square root with an eigenvalue floor guard.
inline Matrix inverse_sqrt_spd(const Matrix& m, double eigen_floor = 1e-12) {
    const EigenSym e = eigen_sym(m);
    const std::size_t n = m.n;
    for (double lam : e.values)
        if (lam < eigen_floor)
            throw std::runtime_error("inverse_sqrt_spd: matrix numerically singular");
    Matrix out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                s += e.vectors(i, k) * e.vectors(j, k) / std::sqrt(e.values[k]);
            out(i, j) = s;
        }
    return out;
}

}  // namespace condcov
