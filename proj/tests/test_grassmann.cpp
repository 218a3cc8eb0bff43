#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "kinshape/grassmann.hpp"
#include "support/oracles.hpp"

using kinshape::Centering;
using kinshape::GapDenominator;
using kinshape::GrassmannDecomposition;
using kinshape::LandmarkShape;
using kinshape::Matrix;

namespace {

double relerr(const Matrix& got, const Matrix& want) {
    return kinshape::max_abs(got - want) / std::max(kinshape::max_abs(want), 1e-300);
}

double sum_hadamard(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            s += a(i, j) * b(i, j);
    return s;
}

// L(S) = <upstream, P(S)> as a function of the raw point matrix.
double projector_loss(const Matrix& pts, const Matrix& upstream, Centering c) {
    const auto dec = kinshape::shape_to_projector(LandmarkShape(pts), c);
    return sum_hadamard(upstream, dec.projector);
}

Matrix fd_projector_grad(const Matrix& pts, const Matrix& upstream, Centering c) {
    const double h = 1e-6 * std::max(1.0, kinshape::max_abs(pts));
    return oracles::fd_gradient([&](const Matrix& x) { return projector_loss(x, upstream, c); }, pts, h);
}

} // namespace

TEST_CASE("landmark shape validation", "[grassmann]") {
    REQUIRE_THROWS_AS(LandmarkShape(Matrix(3, 3)), kinshape::shape_error);
    REQUIRE_THROWS_AS(LandmarkShape(Matrix(2, 2)), kinshape::invalid_input_error);
    Matrix bad(3, 2);
    bad(0, 0) = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(LandmarkShape(bad), kinshape::invalid_input_error);
}

TEST_CASE("projector of orthonormal columns", "[grassmann]") {
    const LandmarkShape s(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}}));
    const auto dec = kinshape::shape_to_projector(s, Centering::off);
    const Matrix expect = Matrix::from_rows({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 0.0}});
    REQUIRE(kinshape::max_abs(dec.projector - expect) < 1e-12);
}

TEST_CASE("projector is invariant to full-rank linear maps of the plane", "[grassmann]") {
    std::mt19937_64 rng(41);
    for (const Centering c : {Centering::on, Centering::off}) {
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix pts = oracles::random_matrix(9, 2, rng, -2.0, 2.0);
            const Matrix a = oracles::random_affine2(rng);
            const auto p0 = kinshape::shape_to_projector(LandmarkShape(pts), c);
            const auto p1 = kinshape::shape_to_projector(LandmarkShape(matmul(pts, a)), c);
            REQUIRE(kinshape::max_abs(p0.projector - p1.projector) < 1e-9);
        }
    }
}

TEST_CASE("projector laws hold on a large random shape", "[grassmann]") {
    std::mt19937_64 rng(42);
    const Matrix pts = oracles::random_matrix(68, 2, rng, -1.0, 1.0);
    const auto dec = kinshape::shape_to_projector(LandmarkShape(pts));
    const Matrix& p = dec.projector;
    REQUIRE(kinshape::max_abs(p - kinshape::transpose(p)) <= 1e-10);
    REQUIRE(kinshape::frobenius_norm(matmul(p, p) - p) <= 1e-9);
    REQUIRE(kinshape::trace(p) == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("collinear landmarks are rejected", "[grassmann]") {
    // A line through the origin is rank deficient with or without centering.
    Matrix ray(5, 2);
    for (std::size_t i = 0; i < 5; ++i) {
        ray(i, 0) = static_cast<double>(i);
        ray(i, 1) = 2.0 * static_cast<double>(i);
    }
    REQUIRE_THROWS_AS(kinshape::shape_to_projector(LandmarkShape(ray), Centering::on),
                      kinshape::degenerate_shape_error);
    REQUIRE_THROWS_AS(kinshape::shape_to_projector(LandmarkShape(ray), Centering::off),
                      kinshape::degenerate_shape_error);

    // An offset line spans a plane as raw coordinates but collapses once the
    // centroid is removed, so only the centered decomposition rejects it.
    Matrix line(5, 2);
    for (std::size_t i = 0; i < 5; ++i) {
        line(i, 0) = static_cast<double>(i);
        line(i, 1) = 2.0 * static_cast<double>(i) + 1.0;
    }
    REQUIRE_THROWS_AS(kinshape::shape_to_projector(LandmarkShape(line), Centering::on),
                      kinshape::degenerate_shape_error);
    REQUIRE_NOTHROW(kinshape::shape_to_projector(LandmarkShape(line), Centering::off));
}

TEST_CASE("comparing a shape with itself gives the zero feature", "[grassmann]") {
    std::mt19937_64 rng(43);
    const LandmarkShape s(oracles::random_matrix(7, 2, rng));
    const auto b = kinshape::aisc_forward(s, s);
    REQUIRE(kinshape::max_abs(b.b) == 0.0);
}

TEST_CASE("feature vanishes under affine maps of one side", "[grassmann]") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix pts = oracles::random_matrix(10, 2, rng, -2.0, 2.0);
        const Matrix a = oracles::random_affine2(rng);
        const auto b = kinshape::aisc_forward(LandmarkShape(pts), LandmarkShape(matmul(pts, a)));
        REQUIRE(kinshape::max_abs(b.b) <= 1e-8);
    }
}

TEST_CASE("feature vanishes under translation when centering is on", "[grassmann]") {
    std::mt19937_64 rng(45);
    const Matrix pts = oracles::random_matrix(10, 2, rng);
    Matrix shifted = pts;
    for (std::size_t i = 0; i < shifted.rows(); ++i) {
        shifted(i, 0) += 3.25;
        shifted(i, 1) -= 1.5;
    }
    const auto b_on = kinshape::aisc_forward(LandmarkShape(pts), LandmarkShape(shifted), Centering::on);
    REQUIRE(kinshape::max_abs(b_on.b) <= 1e-9);
    const auto b_off = kinshape::aisc_forward(LandmarkShape(pts), LandmarkShape(shifted), Centering::off);
    REQUIRE(kinshape::max_abs(b_off.b) > 1e-3);
}

TEST_CASE("feature is antisymmetric in its arguments", "[grassmann]") {
    std::mt19937_64 rng(46);
    const LandmarkShape s0(oracles::random_matrix(8, 2, rng));
    const LandmarkShape s1(oracles::random_matrix(8, 2, rng));
    const auto b01 = kinshape::aisc_forward(s0, s1);
    const auto b10 = kinshape::aisc_forward(s1, s0);
    REQUIRE(kinshape::max_abs(b01.b + b10.b) <= 1e-12);
}

TEST_CASE("feature invariants: symmetry, zero trace, spectrum bounds", "[grassmann]") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 10; ++trial) {
        const LandmarkShape s0(oracles::random_matrix(6, 2, rng));
        const LandmarkShape s1(oracles::random_matrix(6, 2, rng));
        const auto b = kinshape::aisc_forward(s0, s1);
        REQUIRE(kinshape::max_abs(b.b - kinshape::transpose(b.b)) <= 1e-12);
        REQUIRE(std::abs(kinshape::trace(b.b)) <= 1e-9);
        const auto eig = kinshape::sym_eigen(b.b);
        for (double v : eig.values) {
            REQUIRE(v <= 1.0 + 1e-9);
            REQUIRE(v >= -1.0 - 1e-9);
        }
    }
}

TEST_CASE("mismatched landmark counts are rejected", "[grassmann]") {
    std::mt19937_64 rng(48);
    const LandmarkShape s0(oracles::random_matrix(6, 2, rng));
    const LandmarkShape s1(oracles::random_matrix(7, 2, rng));
    REQUIRE_THROWS_AS(kinshape::aisc_forward(s0, s1), kinshape::shape_error);
}

TEST_CASE("svd-path pullback matches finite differences", "[grassmann]") {
    std::mt19937_64 rng(51);
    for (const Centering c : {Centering::on, Centering::off}) {
        for (std::size_t m : {5, 10, 68}) {
            const Matrix pts = oracles::random_matrix(m, 2, rng, -2.0, 2.0);
            const Matrix upstream = oracles::random_matrix(m, m, rng);
            const LandmarkShape s(pts);
            const auto dec = kinshape::shape_to_projector(s, c);
            const Matrix grad = kinshape::projector_pullback_svd(s, dec, upstream);
            const Matrix fd = fd_projector_grad(pts, upstream, c);
            REQUIRE(relerr(grad, fd) < 1e-4);
        }
    }
}

TEST_CASE("gram-path pullback matches finite differences", "[grassmann]") {
    std::mt19937_64 rng(52);
    for (const Centering c : {Centering::on, Centering::off}) {
        for (std::size_t m : {5, 10, 68}) {
            const Matrix pts = oracles::random_matrix(m, 2, rng, -2.0, 2.0);
            const Matrix upstream = oracles::random_matrix(m, m, rng);
            const LandmarkShape s(pts);
            const auto dec = kinshape::shape_to_projector(s, c);
            const Matrix grad = kinshape::projector_pullback_gram(s, dec, upstream);
            const Matrix fd = fd_projector_grad(pts, upstream, c);
            REQUIRE(relerr(grad, fd) < 1e-4);
        }
    }
}

TEST_CASE("the two backward paths agree wherever both are defined", "[grassmann]") {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 5 + static_cast<std::size_t>(trial % 8);
        const Matrix pts = oracles::random_matrix(m, 2, rng, -2.0, 2.0);
        const Matrix upstream = oracles::random_matrix(m, m, rng);
        const LandmarkShape s(pts);
        const auto dec = kinshape::shape_to_projector(s);
        const Matrix a = kinshape::projector_pullback_svd(s, dec, upstream);
        const Matrix b = kinshape::projector_pullback_gram(s, dec, upstream);
        REQUIRE(relerr(a, b) < 1e-8);
    }
}

TEST_CASE("only the difference denominator solves the coupled system", "[grassmann]") {
    std::mt19937_64 rng(54);
    double worst_difference = 0.0;
    double best_sum = 1e300;
    double worst_sum = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix pts = oracles::random_matrix(10, 2, rng, -2.0, 2.0);
        const Matrix upstream = oracles::random_matrix(10, 10, rng);
        const LandmarkShape s(pts);
        const auto dec = kinshape::shape_to_projector(s);
        const Matrix fd = fd_projector_grad(pts, upstream, Centering::on);
        const Matrix gd = kinshape::projector_pullback_svd(s, dec, upstream, GapDenominator::difference);
        const Matrix gs = kinshape::projector_pullback_svd(s, dec, upstream, GapDenominator::sum);
        worst_difference = std::max(worst_difference, relerr(gd, fd));
        best_sum = std::min(best_sum, relerr(gs, fd));
        worst_sum = std::max(worst_sum, relerr(gs, fd));
    }
    REQUIRE(worst_difference < 1e-4); // difference form passes the gradient gate
    REQUIRE(best_sum > 1e-4);         // sum form fails it on every draw
    REQUIRE(worst_sum > 0.1);         // and is wrong at leading order, not borderline
}

TEST_CASE("pair backward matches finite differences on both slots", "[grassmann]") {
    std::mt19937_64 rng(55);
    const std::size_t m = 10;
    const Matrix pts0 = oracles::random_matrix(m, 2, rng, -2.0, 2.0);
    const Matrix pts1 = oracles::random_matrix(m, 2, rng, -2.0, 2.0);
    const Matrix upstream = oracles::random_matrix(m, m, rng);
    const LandmarkShape s0(pts0), s1(pts1);
    const auto d0 = kinshape::shape_to_projector(s0);
    const auto d1 = kinshape::shape_to_projector(s1);

    const auto pair_loss = [&](const Matrix& a, const Matrix& b) {
        const auto fb = kinshape::aisc_forward(LandmarkShape(a), LandmarkShape(b));
        return sum_hadamard(upstream, fb.b);
    };
    const double h = 1e-6;
    const Matrix fd0 = oracles::fd_gradient([&](const Matrix& x) { return pair_loss(x, pts1); }, pts0, h);
    const Matrix fd1 = oracles::fd_gradient([&](const Matrix& x) { return pair_loss(pts0, x); }, pts1, h);

    const auto gsvd = kinshape::aisc_backward_svd(s0, s1, d0, d1, upstream);
    const auto gprj = kinshape::aisc_backward_projector(s0, s1, d0, d1, upstream);
    REQUIRE(relerr(gsvd.grad_s0, fd0) < 1e-4);
    REQUIRE(relerr(gsvd.grad_s1, fd1) < 1e-4);
    REQUIRE(relerr(gprj.grad_s0, fd0) < 1e-4);
    REQUIRE(relerr(gprj.grad_s1, fd1) < 1e-4);
}

TEST_CASE("zero upstream produces zero gradients", "[grassmann]") {
    std::mt19937_64 rng(56);
    const LandmarkShape s0(oracles::random_matrix(6, 2, rng));
    const LandmarkShape s1(oracles::random_matrix(6, 2, rng));
    const auto d0 = kinshape::shape_to_projector(s0);
    const auto d1 = kinshape::shape_to_projector(s1);
    const Matrix zero(6, 6);
    const auto gsvd = kinshape::aisc_backward_svd(s0, s1, d0, d1, zero);
    const auto gprj = kinshape::aisc_backward_projector(s0, s1, d0, d1, zero);
    REQUIRE(kinshape::max_abs(gsvd.grad_s0) == 0.0);
    REQUIRE(kinshape::max_abs(gsvd.grad_s1) == 0.0);
    REQUIRE(kinshape::max_abs(gprj.grad_s0) == 0.0);
    REQUIRE(kinshape::max_abs(gprj.grad_s1) == 0.0);
}

TEST_CASE("role swap negates the gradient of a shape", "[grassmann]") {
    std::mt19937_64 rng(57);
    const LandmarkShape s0(oracles::random_matrix(7, 2, rng));
    const LandmarkShape s1(oracles::random_matrix(7, 2, rng));
    const auto d0 = kinshape::shape_to_projector(s0);
    const auto d1 = kinshape::shape_to_projector(s1);
    const Matrix upstream = oracles::random_matrix(7, 7, rng);
    const auto fwd = kinshape::aisc_backward_svd(s0, s1, d0, d1, upstream);
    const auto swp = kinshape::aisc_backward_svd(s1, s0, d1, d0, upstream);
    REQUIRE(kinshape::max_abs(fwd.grad_s0 + swp.grad_s1) < 1e-12);
    REQUIRE(kinshape::max_abs(fwd.grad_s1 + swp.grad_s0) < 1e-12);
}

TEST_CASE("gradients vanish along affine-invariant directions", "[grassmann]") {
    std::mt19937_64 rng(58);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix pts = oracles::random_matrix(9, 2, rng, -2.0, 2.0);
        const Matrix upstream = oracles::random_matrix(9, 9, rng);
        const LandmarkShape s(pts);
        const auto dec = kinshape::shape_to_projector(s);
        const Matrix grad = kinshape::projector_pullback_svd(s, dec, upstream);
        const Matrix dir = matmul(pts, oracles::random_matrix(2, 2, rng));
        REQUIRE(std::abs(sum_hadamard(grad, dir)) <= 1e-8);
    }
}

TEST_CASE("gradients vanish along translations when centering is on", "[grassmann]") {
    std::mt19937_64 rng(59);
    const Matrix pts = oracles::random_matrix(9, 2, rng);
    const Matrix upstream = oracles::random_matrix(9, 9, rng);
    const LandmarkShape s(pts);
    const auto dec = kinshape::shape_to_projector(s, Centering::on);
    const Matrix grad = kinshape::projector_pullback_svd(s, dec, upstream);
    Matrix dir(9, 2);
    for (std::size_t i = 0; i < 9; ++i) {
        dir(i, 0) = 0.7;
        dir(i, 1) = -0.3;
    }
    REQUIRE(std::abs(sum_hadamard(grad, dir)) <= 1e-12);
}

TEST_CASE("svd path refuses repeated singular values; gram path still correct", "[grassmann]") {
    // A square centered at the origin has two equal singular values.
    const Matrix pts = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}});
    const LandmarkShape s(pts);
    const auto dec = kinshape::shape_to_projector(s, Centering::on);
    REQUIRE(std::abs(dec.svd.d[0] - dec.svd.d[1]) < 1e-12);

    std::mt19937_64 rng(60);
    const Matrix upstream = oracles::random_matrix(4, 4, rng);
    REQUIRE_THROWS_AS(kinshape::projector_pullback_svd(s, dec, upstream),
                      kinshape::degenerate_spectrum_error);

    const Matrix grad = kinshape::projector_pullback_gram(s, dec, upstream);
    const Matrix fd = fd_projector_grad(pts, upstream, Centering::on);
    REQUIRE(relerr(grad, fd) < 1e-4);
}

TEST_CASE("backward input validation", "[grassmann]") {
    std::mt19937_64 rng(61);
    const LandmarkShape s0(oracles::random_matrix(5, 2, rng));
    const LandmarkShape s1(oracles::random_matrix(5, 2, rng));
    const auto d0 = kinshape::shape_to_projector(s0, Centering::on);
    const auto d1_off = kinshape::shape_to_projector(s1, Centering::off);
    const Matrix upstream(5, 5);
    REQUIRE_THROWS_AS(kinshape::aisc_backward_svd(s0, s1, d0, d1_off, upstream),
                      kinshape::invalid_input_error);
    const auto d1 = kinshape::shape_to_projector(s1, Centering::on);
    REQUIRE_THROWS_AS(kinshape::aisc_backward_svd(s0, s1, d0, d1, Matrix(4, 4)),
                      kinshape::shape_error);
}

TEST_CASE("geodesic info for identical subspaces", "[grassmann]") {
    std::mt19937_64 rng(62);
    const LandmarkShape s(oracles::random_matrix(6, 2, rng));
    const auto dec = kinshape::shape_to_projector(s);
    const auto b = kinshape::aisc_forward(dec, dec);
    const auto info = kinshape::geodesic_info(b, dec, dec);
    REQUIRE(info.principal_cosines.size() == 2);
    REQUIRE(info.principal_cosines[0] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(info.principal_cosines[1] == Catch::Approx(1.0).margin(1e-9));
    for (double v : info.geodesic_generator_eigenvalues)
        REQUIRE(std::abs(v) < 1e-9);
}

TEST_CASE("geodesic info for orthogonal subspaces in dimension four", "[grassmann]") {
    const LandmarkShape s0(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}, {0.0, 0.0}}));
    const LandmarkShape s1(Matrix::from_rows({{0.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}));
    const auto d0 = kinshape::shape_to_projector(s0, Centering::off);
    const auto d1 = kinshape::shape_to_projector(s1, Centering::off);
    const auto b = kinshape::aisc_forward(d0, d1);
    const auto info = kinshape::geodesic_info(b, d0, d1);
    REQUIRE(info.principal_cosines[0] == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(info.principal_cosines[1] == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("feature spectrum pairs up and links to principal angles", "[grassmann]") {
    std::mt19937_64 rng(63);
    for (int trial = 0; trial < 10; ++trial) {
        const LandmarkShape s0(oracles::random_matrix(8, 2, rng));
        const LandmarkShape s1(oracles::random_matrix(8, 2, rng));
        const auto d0 = kinshape::shape_to_projector(s0);
        const auto d1 = kinshape::shape_to_projector(s1);
        const auto b = kinshape::aisc_forward(d0, d1);
        const auto info = kinshape::geodesic_info(b, d0, d1);
        const auto& lam = info.geodesic_generator_eigenvalues;
        const std::size_t n = lam.size();
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(std::abs(lam[i]) <= 1.0 + 1e-9);
            REQUIRE(lam[i] + lam[n - 1 - i] == Catch::Approx(0.0).margin(1e-9));
        }
        // Largest eigenvalue is the sine of the largest principal angle.
        const double cmin = std::min(info.principal_cosines[0], info.principal_cosines[1]);
        REQUIRE(lam[0] == Catch::Approx(std::sqrt(std::max(0.0, 1.0 - cmin * cmin))).margin(1e-9));
    }
}
