#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "kinshape/errors.hpp"
#include "kinshape/matrix.hpp"

namespace kinshape {

// Thin SVD a = u * diag(d) * v^T with u (m x k) having orthonormal columns,
// d descending and nonnegative, v (k x k) orthogonal.
struct ThinSvd {
    Matrix u;
    std::vector<double> d;
    Matrix v;
};

namespace detail {

// Gram-Schmidt completion for columns whose singular value is (near) zero:
// replace column `col` of u with the unit vector most orthogonal to the
// columns before it. Deterministic candidate choice.
inline void complete_basis_column(Matrix& u, std::size_t col) {
    const std::size_t m = u.rows();
    std::size_t best = 0;
    double best_norm = -1.0;
    std::vector<double> best_vec(m, 0.0);
    for (std::size_t cand = 0; cand < m; ++cand) {
        std::vector<double> v(m, 0.0);
        v[cand] = 1.0;
        for (std::size_t j = 0; j < col; ++j) {
            double proj = 0.0;
            for (std::size_t i = 0; i < m; ++i) proj += v[i] * u(i, j);
            for (std::size_t i = 0; i < m; ++i) v[i] -= proj * u(i, j);
        }
        double n2 = 0.0;
        for (double x : v) n2 += x * x;
        if (n2 > best_norm + 1e-12) {
            best_norm = n2;
            best = cand;
            best_vec = v;
        }
    }
    (void)best;
    const double n = std::sqrt(best_norm);
    for (std::size_t i = 0; i < m; ++i) u(i, col) = best_vec[i] / n;
}

} // namespace detail

// One-sided Jacobi SVD. Rotates column pairs of a working copy until all
// columns are mutually orthogonal, accumulating the rotations into v;
// singular values are the final column norms. Exact for k = 2 after one
// sweep; general k converges in a handful of sweeps at these sizes.
inline ThinSvd thin_svd(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t k = a.cols();
    if (m == 0 || k == 0)
        throw shape_error("thin_svd: empty matrix");
    if (m < k)
        throw shape_error("thin_svd: requires rows >= cols, got " + detail::shape_str(a));
    if (!a.all_finite())
        throw invalid_input_error("thin_svd: non-finite entry in input");

    Matrix w = a;
    Matrix v = Matrix::identity(k);

    constexpr int max_sweeps = 60;
    constexpr double tol = 1e-15;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < k; ++p) {
            for (std::size_t q = p + 1; q < k; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    app += w(i, p) * w(i, p);
                    aqq += w(i, q) * w(i, q);
                    apq += w(i, p) * w(i, q);
                }
                if (std::abs(apq) <= tol * std::sqrt(app * aqq))
                    continue;
                rotated = true;
                // Rutishauser rotation zeroing the (p,q) Gram entry.
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                }
                for (std::size_t i = 0; i < k; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> d(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        double n2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) n2 += w(i, j) * w(i, j);
        d[j] = std::sqrt(n2);
    }

    // Sort descending, carrying w and v columns along.
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t arg = i;
        for (std::size_t j = i + 1; j < k; ++j)
            if (d[j] > d[arg]) arg = j;
        if (arg != i) {
            std::swap(d[i], d[arg]);
            for (std::size_t r = 0; r < m; ++r) std::swap(w(r, i), w(r, arg));
            for (std::size_t r = 0; r < k; ++r) std::swap(v(r, i), v(r, arg));
        }
    }

    // Normalize columns into u. Columns below the numerical-rank cutoff get
    // a completed orthonormal basis instead; the subsequent Gram-Schmidt
    // pass keeps near-dependent columns orthogonal to working precision.
    const double cutoff = static_cast<double>(m) * std::numeric_limits<double>::epsilon() * (d.empty() ? 0.0 : d[0]);
    Matrix u(m, k);
    for (std::size_t j = 0; j < k; ++j) {
        if (d[j] > cutoff && d[j] > 0.0) {
            for (std::size_t i = 0; i < m; ++i) u(i, j) = w(i, j) / d[j];
        } else {
            detail::complete_basis_column(u, j);
            d[j] = 0.0;
        }
    }
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t p = 0; p < j; ++p) {
            double proj = 0.0;
            for (std::size_t i = 0; i < m; ++i) proj += u(i, p) * u(i, j);
            for (std::size_t i = 0; i < m; ++i) u(i, j) -= proj * u(i, p);
        }
        double n2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) n2 += u(i, j) * u(i, j);
        const double n = std::sqrt(n2);
        if (n < 0.5) {
            detail::complete_basis_column(u, j);
            d[j] = 0.0;
        } else {
            for (std::size_t i = 0; i < m; ++i) u(i, j) /= n;
        }
    }

    // Sign convention: largest-magnitude entry of each u column positive,
    // mirrored into v so the product is unchanged.
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double mag = std::abs(u(i, j));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        if (u(arg, j) < 0.0) {
            for (std::size_t i = 0; i < m; ++i) u(i, j) = -u(i, j);
            for (std::size_t i = 0; i < k; ++i) v(i, j) = -v(i, j);
        }
    }

    return ThinSvd{std::move(u), std::move(d), std::move(v)};
}

// u * diag(d) * v^T, for residual checks and reconstruction.
inline Matrix svd_reconstruct(const ThinSvd& s) {
    Matrix ud = s.u;
    for (std::size_t j = 0; j < s.d.size(); ++j)
        for (std::size_t i = 0; i < ud.rows(); ++i)
            ud(i, j) *= s.d[j];
    return matmul(ud, transpose(s.v));
}

} // namespace kinshape
