#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "kinshape/eigen.hpp"
#include "kinshape/errors.hpp"
#include "kinshape/matrix.hpp"
#include "kinshape/svd.hpp"

namespace kinshape {

// Whether shapes are translated to their centroid before decomposition.
// The projector representation absorbs linear maps S -> S*A on its own;
// centering additionally removes translations, which real landmark data
// always carries. Default is on.
enum class Centering { on, off };

// Denominator used for the in-span rotation coefficient of the SVD-path
// backward. Solving the coupled 2x2 system exactly yields the difference of
// squared singular values; `sum` substitutes the other sign and is retained
// purely as a diagnostic variant (it fails finite-difference checks, which
// the test suite demonstrates).
enum class GapDenominator { difference, sum };

// An m x 2 matrix of landmark coordinates. Unit-free: the downstream
// representation is invariant to full-rank linear maps of the plane.
struct LandmarkShape {
    Matrix points;

    explicit LandmarkShape(Matrix pts) : points(std::move(pts)) {
        if (points.cols() != 2)
            throw shape_error("landmark shape must have 2 columns, got " + detail::shape_str(points));
        if (points.rows() < 3)
            throw invalid_input_error("landmark shape needs at least 3 points");
        if (!points.all_finite())
            throw invalid_input_error("landmark shape has a non-finite coordinate");
    }

    std::size_t landmark_count() const { return points.rows(); }
};

// SVD of the (optionally centered) shape together with the subspace
// projector P = U*U^T. Immutable once built.
struct GrassmannDecomposition {
    ThinSvd svd;
    Matrix projector;
    Centering centering;
};

// The comparison feature B = P0 - P1: symmetric, trace zero, spectrum in
// [-1, 1] with nonzero eigenvalues in +/- pairs (sines of the principal
// angles between the two subspaces).
struct ShapeCompareFeature {
    Matrix b;
};

// Scalar summary of the relative position of the two subspaces.
struct GeodesicInfo {
    std::vector<double> principal_cosines;             // cosines of principal angles, in [0,1]
    std::vector<double> geodesic_generator_eigenvalues; // spectrum of B, descending
};

// Gradients with respect to the raw (uncentered) entries of both shapes.
struct ShapeGradients {
    Matrix grad_s0;
    Matrix grad_s1;
};

namespace detail {

inline Matrix maybe_center(const Matrix& pts, Centering c) {
    return c == Centering::on ? center_rows(pts) : pts;
}

inline void require_pair_compatible(const GrassmannDecomposition& d0, const GrassmannDecomposition& d1) {
    if (d0.projector.rows() != d1.projector.rows())
        throw shape_error("landmark counts differ between the two shapes");
    if (d0.centering != d1.centering)
        throw invalid_input_error("centering modes differ between the two decompositions");
}

inline void require_upstream(const Matrix& upstream, std::size_t m) {
    if (upstream.rows() != m || upstream.cols() != m)
        throw shape_error("upstream gradient must be " + std::to_string(m) + "x" + std::to_string(m) +
                          ", got " + shape_str(upstream));
    if (!upstream.all_finite())
        throw invalid_input_error("upstream gradient has a non-finite entry");
}

} // namespace detail

// Decompose a shape into its subspace basis and projector. Collinear (rank
// deficient after optional centering) landmark sets are rejected: they do
// not span a plane and have no well-defined projector of trace 2.
inline GrassmannDecomposition shape_to_projector(const LandmarkShape& s, Centering centering = Centering::on) {
    const Matrix pts = detail::maybe_center(s.points, centering);
    ThinSvd svd = thin_svd(pts);
    if (svd.d[0] <= 0.0 || svd.d[1] <= 1e-8 * svd.d[0])
        throw degenerate_shape_error("landmarks are collinear (rank-deficient shape)");
    Matrix projector = matmul(svd.u, transpose(svd.u));
    return GrassmannDecomposition{std::move(svd), std::move(projector), centering};
}

inline ShapeCompareFeature aisc_forward(const GrassmannDecomposition& d0, const GrassmannDecomposition& d1) {
    detail::require_pair_compatible(d0, d1);
    return ShapeCompareFeature{d0.projector - d1.projector};
}

inline ShapeCompareFeature aisc_forward(const LandmarkShape& s0, const LandmarkShape& s1,
                                        Centering centering = Centering::on) {
    return aisc_forward(shape_to_projector(s0, centering), shape_to_projector(s1, centering));
}

// Gradient of L = <upstream, P(S)> with respect to the raw entries of S,
// computed through the SVD factors. Derivation sketch: with P = U*U^T and
// Gs = upstream + upstream^T, dL = <Gs*U, dU>. Splitting dU into the
// in-span rotation U*Omega (Omega antisymmetric, from the coupled 2x2
// system in the singular vectors) and the out-of-span part
// (I-P)*E_ij*V*inv(D) gives, per input entry (i,j):
//
//   grad(i,j) = [ (d1*U_i0*V_j1 + d0*U_i1*V_j0) / den ] * tfac
//             + sum_l V_jl / d_l * W_il
//
// with W = (I-P)*Gs*U, den = d1^2 - d0^2, tfac = T01 - T10 for
// T = U^T*Gs*U. Because T is symmetric the in-span term is identically
// zero in exact arithmetic; it is kept so the `sum` diagnostic variant
// (den = d1^2 + d0^2, tfac = T01 + T10, Omega symmetric) can be evaluated
// through the same code and shown to disagree with finite differences.
inline Matrix projector_pullback_svd(const LandmarkShape& s, const GrassmannDecomposition& dec,
                                     const Matrix& upstream,
                                     GapDenominator denom = GapDenominator::difference) {
    const std::size_t m = s.landmark_count();
    if (dec.projector.rows() != m)
        throw shape_error("decomposition does not match the shape's landmark count");
    detail::require_upstream(upstream, m);

    const Matrix& u = dec.svd.u;
    const Matrix& v = dec.svd.v;
    const double d0 = dec.svd.d[0];
    const double d1 = dec.svd.d[1];
    if (std::abs(d0 * d0 - d1 * d1) <= 1e-8 * d0 * d0)
        throw degenerate_spectrum_error("singular values too close; coupled system is singular "
                                        "(use the projector-path backward instead)");

    const Matrix gs = upstream + transpose(upstream);
    const Matrix dldu = matmul(gs, u);                 // m x 2
    const Matrix t = matmul(transpose(u), dldu);       // 2 x 2
    const Matrix w = dldu - matmul(u, t);              // (I - P) * dldu

    const bool difference = denom == GapDenominator::difference;
    const double den = difference ? (d1 * d1 - d0 * d0) : (d1 * d1 + d0 * d0);
    const double tfac = difference ? (t(0, 1) - t(1, 0)) : (t(0, 1) + t(1, 0));

    Matrix grad(m, 2);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            const double num = d1 * u(i, 0) * v(j, 1) + d0 * u(i, 1) * v(j, 0);
            const double inspan = (num / den) * tfac;
            const double outspan = v(j, 0) / d0 * w(i, 0) + v(j, 1) / d1 * w(i, 1);
            grad(i, j) = inspan + outspan;
        }
    }
    // Chain through the centering map S -> S - mean(S): its adjoint is the
    // same row-centering applied to the gradient.
    if (dec.centering == Centering::on) grad = center_rows(grad);
    return grad;
}

// Same gradient through the closed-form projector P = S * pinv(S) with
// pinv(S) = inv(S^T S) * S^T: dP = (I-P)*dS*pinv + pinv^T*dS^T*(I-P), so
// grad = (I-P) * Gs * pinv^T. Defined for any full-rank shape, including
// repeated singular values; serves as the independent oracle path.
inline Matrix projector_pullback_gram(const LandmarkShape& s, const GrassmannDecomposition& dec,
                                      const Matrix& upstream) {
    const std::size_t m = s.landmark_count();
    if (dec.projector.rows() != m)
        throw shape_error("decomposition does not match the shape's landmark count");
    detail::require_upstream(upstream, m);

    const Matrix pts = detail::maybe_center(s.points, dec.centering);
    double g00 = 0.0, g01 = 0.0, g11 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        g00 += pts(i, 0) * pts(i, 0);
        g01 += pts(i, 0) * pts(i, 1);
        g11 += pts(i, 1) * pts(i, 1);
    }
    const double det = g00 * g11 - g01 * g01;
    const double scale = std::max(g00, g11);
    if (!(det > 1e-14 * scale * scale))
        throw degenerate_shape_error("landmarks are collinear (Gram matrix singular)");

    // pinv^T = S * inv(Gram), using the closed-form 2x2 inverse.
    Matrix pinvt(m, 2);
    for (std::size_t i = 0; i < m; ++i) {
        pinvt(i, 0) = (pts(i, 0) * g11 - pts(i, 1) * g01) / det;
        pinvt(i, 1) = (pts(i, 1) * g00 - pts(i, 0) * g01) / det;
    }

    const Matrix gs = upstream + transpose(upstream);
    const Matrix x = matmul(gs, pinvt);
    Matrix grad = x - matmul(dec.projector, x);
    if (dec.centering == Centering::on) grad = center_rows(grad);
    return grad;
}

// Backward pass for B = P0 - P1 through the SVD factors. The s1 branch is
// the same pullback with negated upstream (dL/dP1 = -dL/dB).
inline ShapeGradients aisc_backward_svd(const LandmarkShape& s0, const LandmarkShape& s1,
                                        const GrassmannDecomposition& d0, const GrassmannDecomposition& d1,
                                        const Matrix& upstream,
                                        GapDenominator denom = GapDenominator::difference) {
    detail::require_pair_compatible(d0, d1);
    Matrix g0 = projector_pullback_svd(s0, d0, upstream, denom);
    Matrix g1 = projector_pullback_svd(s1, d1, -upstream, denom);
    return ShapeGradients{std::move(g0), std::move(g1)};
}

// Backward pass through the closed-form projector; defined even where the
// SVD path refuses (repeated singular values).
inline ShapeGradients aisc_backward_projector(const LandmarkShape& s0, const LandmarkShape& s1,
                                              const GrassmannDecomposition& d0, const GrassmannDecomposition& d1,
                                              const Matrix& upstream) {
    detail::require_pair_compatible(d0, d1);
    Matrix g0 = projector_pullback_gram(s0, d0, upstream);
    Matrix g1 = projector_pullback_gram(s1, d1, -upstream);
    return ShapeGradients{std::move(g0), std::move(g1)};
}

// Principal-angle cosines (singular values of U0^T * U1, clamped to [0,1])
// and the spectrum of B. The nonzero eigenvalues of B are the sines of the
// principal angles, in +/- pairs.
inline GeodesicInfo geodesic_info(const ShapeCompareFeature& b, const GrassmannDecomposition& d0,
                                  const GrassmannDecomposition& d1) {
    detail::require_pair_compatible(d0, d1);
    if (b.b.rows() != d0.projector.rows() || b.b.cols() != d0.projector.cols())
        throw shape_error("feature matrix does not match the decompositions");

    const Matrix overlap = matmul(transpose(d0.svd.u), d1.svd.u);
    const ThinSvd osvd = thin_svd(overlap);
    std::vector<double> cosines(osvd.d.size());
    for (std::size_t i = 0; i < osvd.d.size(); ++i)
        cosines[i] = std::clamp(osvd.d[i], 0.0, 1.0);

    const SymEigen eig = sym_eigen(b.b);
    return GeodesicInfo{std::move(cosines), eig.values};
}

} // namespace kinshape
