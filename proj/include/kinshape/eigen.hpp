#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "kinshape/errors.hpp"
#include "kinshape/matrix.hpp"

namespace kinshape {

// Eigendecomposition of a symmetric matrix: a = q * diag(values) * q^T with
// values sorted descending (signed order, not by magnitude) and q orthogonal.
struct SymEigen {
    std::vector<double> values;
    Matrix q;
};

// Cyclic Jacobi eigensolver for symmetric matrices. Input symmetry is a
// precondition, checked up to a relative tolerance; the iteration itself
// works on the symmetrized upper triangle.
inline SymEigen sym_eigen(const Matrix& a) {
    const std::size_t n = a.rows();
    if (n == 0 || a.cols() != n)
        throw shape_error("sym_eigen: square matrix required, got " + detail::shape_str(a));
    if (!a.all_finite())
        throw invalid_input_error("sym_eigen: non-finite entry in input");

    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double diff = a(i, j) - a(j, i);
            asym += diff * diff;
        }
    const double scale = frobenius_norm(a);
    if (std::sqrt(asym) > 1e-8 * std::max(1.0, scale))
        throw invalid_input_error("sym_eigen: matrix is not symmetric");

    Matrix w(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            w(i, j) = 0.5 * (a(i, j) + a(j, i));
    Matrix q = Matrix::identity(n);

    constexpr int max_sweeps = 60;
    constexpr double tol = 1e-15;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                off += w(i, j) * w(i, j);
        if (std::sqrt(off) <= tol * std::max(1.0, scale)) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t qq = p + 1; qq < n; ++qq) {
                const double apq = w(p, qq);
                if (std::abs(apq) <= tol * std::max(1.0, scale))
                    continue;
                const double app = w(p, p);
                const double aqq2 = w(qq, qq);
                const double tau = (aqq2 - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // Two-sided rotation on rows/cols p and qq.
                for (std::size_t i = 0; i < n; ++i) {
                    const double wip = w(i, p), wiq = w(i, qq);
                    w(i, p) = c * wip - s * wiq;
                    w(i, qq) = s * wip + c * wiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double wpi = w(p, i), wqi = w(qq, i);
                    w(p, i) = c * wpi - s * wqi;
                    w(qq, i) = s * wpi + c * wqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double qip = q(i, p), qiq = q(i, qq);
                    q(i, p) = c * qip - s * qiq;
                    q(i, qq) = s * qip + c * qiq;
                }
            }
        }
    }

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = w(i, i);

    // Sort by eigenvalue, descending, carrying eigenvector columns.
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t arg = i;
        for (std::size_t j = i + 1; j < n; ++j)
            if (values[j] > values[arg]) arg = j;
        if (arg != i) {
            std::swap(values[i], values[arg]);
            for (std::size_t r = 0; r < n; ++r) std::swap(q(r, i), q(r, arg));
        }
    }

    // Sign convention: largest-magnitude entry of each eigenvector positive.
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double mag = std::abs(q(i, j));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        if (q(arg, j) < 0.0)
            for (std::size_t i = 0; i < n; ++i) q(i, j) = -q(i, j);
    }

    return SymEigen{std::move(values), std::move(q)};
}

} // namespace kinshape
