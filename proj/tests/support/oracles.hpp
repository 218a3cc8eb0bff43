#pragma once

// Independent checks used by the test suite: finite-difference gradients,
// a closed-form 3x3 symmetric eigenvalue solver (trigonometric solution of
// the characteristic cubic, no iteration shared with the library code),
// and seeded random matrix generators.

#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "kinshape/matrix.hpp"

namespace oracles {

// Central finite-difference gradient of a scalar function of a matrix.
template <typename F>
kinshape::Matrix fd_gradient(F&& f, const kinshape::Matrix& x, double h) {
    kinshape::Matrix g(x.rows(), x.cols());
    kinshape::Matrix xp = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double orig = xp(i, j);
            xp(i, j) = orig + h;
            const double fp = f(xp);
            xp(i, j) = orig - h;
            const double fm = f(xp);
            xp(i, j) = orig;
            g(i, j) = (fp - fm) / (2.0 * h);
        }
    }
    return g;
}

// Central finite-difference gradient of a scalar function of a vector.
template <typename F>
std::vector<double> fd_gradient_vec(F&& f, const std::vector<double>& x, double h) {
    std::vector<double> g(x.size());
    std::vector<double> xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = xp[i];
        xp[i] = orig + h;
        const double fp = f(xp);
        xp[i] = orig - h;
        const double fm = f(xp);
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Eigenvalues of a symmetric 3x3 matrix, descending, from the trigonometric
// solution of the characteristic polynomial.
inline std::array<double, 3> eig3_symmetric(const kinshape::Matrix& a) {
    const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    std::array<double, 3> eig{};
    if (p1 == 0.0) {
        eig = {a(0, 0), a(1, 1), a(2, 2)};
    } else {
        const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
        const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                          (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
        const double p = std::sqrt(p2 / 6.0);
        kinshape::Matrix b(3, 3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                b(i, j) = (a(i, j) - (i == j ? q : 0.0)) / p;
        const double detb = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                            b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                            b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
        double r = detb / 2.0;
        r = std::max(-1.0, std::min(1.0, r));
        const double phi = std::acos(r) / 3.0;
        const double e1 = q + 2.0 * p * std::cos(phi);
        const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * 3.14159265358979323846 / 3.0);
        eig = {e1, 3.0 * q - e1 - e3, e3};
    }
    if (eig[0] < eig[1]) std::swap(eig[0], eig[1]);
    if (eig[1] < eig[2]) std::swap(eig[1], eig[2]);
    if (eig[0] < eig[1]) std::swap(eig[0], eig[1]);
    return eig;
}

inline kinshape::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                      double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    kinshape::Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(i, j) = dist(rng);
    return m;
}

inline kinshape::Matrix random_symmetric(std::size_t n, std::mt19937_64& rng) {
    kinshape::Matrix m = random_matrix(n, n, rng);
    kinshape::Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            s(i, j) = 0.5 * (m(i, j) + m(j, i));
    return s;
}

// Random 2x2 affine map with determinant bounded away from zero, for
// invariance tests.
inline kinshape::Matrix random_affine2(std::mt19937_64& rng, double det_floor = 0.2) {
    for (;;) {
        kinshape::Matrix a = random_matrix(2, 2, rng, -2.0, 2.0);
        const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
        if (std::abs(det) >= det_floor) return a;
    }
}

} // namespace oracles
