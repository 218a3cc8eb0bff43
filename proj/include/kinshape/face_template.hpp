#pragma once

#include "kinshape/grassmann.hpp"
#include "kinshape/matrix.hpp"

namespace kinshape {

// Stylized 68-point face used as the synthetic generator's base template
// (jaw, brows, nose, eyes, lips). Coordinates are unitless in roughly
// [-1, 1]^2; only non-degeneracy matters to the math. The same values are
// stored as a loadable asset at assets/face_template_68.txt.
inline const Matrix& face_template_points() {
    static const Matrix pts = Matrix::from_rows({
        {-0.900, -0.150},
        {-0.883, -0.306},
        {-0.831, -0.456},
        {-0.748, -0.594},
        {-0.636, -0.716},
        {-0.500, -0.815},
        {-0.344, -0.889},
        {-0.176, -0.935},
        {0.000, -0.950},
        {0.176, -0.935},
        {0.344, -0.889},
        {0.500, -0.815},
        {0.636, -0.716},
        {0.748, -0.594},
        {0.831, -0.456},
        {0.883, -0.306},
        {0.900, -0.150},
        {-0.620, 0.520},
        {-0.510, 0.569},
        {-0.400, 0.590},
        {-0.290, 0.569},
        {-0.180, 0.520},
        {0.180, 0.520},
        {0.290, 0.569},
        {0.400, 0.590},
        {0.510, 0.569},
        {0.620, 0.520},
        {0.000, 0.400},
        {0.000, 0.240},
        {0.000, 0.080},
        {0.000, -0.080},
        {-0.160, -0.210},
        {-0.080, -0.195},
        {0.000, -0.160},
        {0.080, -0.125},
        {0.160, -0.110},
        {-0.550, 0.330},
        {-0.475, 0.391},
        {-0.325, 0.391},
        {-0.250, 0.330},
        {-0.325, 0.269},
        {-0.475, 0.269},
        {0.250, 0.330},
        {0.325, 0.391},
        {0.475, 0.391},
        {0.550, 0.330},
        {0.475, 0.269},
        {0.325, 0.269},
        {-0.300, -0.520},
        {-0.260, -0.455},
        {-0.150, -0.407},
        {0.000, -0.390},
        {0.150, -0.407},
        {0.260, -0.455},
        {0.300, -0.520},
        {0.260, -0.605},
        {0.150, -0.667},
        {0.000, -0.690},
        {-0.150, -0.667},
        {-0.260, -0.605},
        {-0.180, -0.520},
        {-0.127, -0.478},
        {0.000, -0.460},
        {0.127, -0.478},
        {0.180, -0.520},
        {0.127, -0.562},
        {0.000, -0.580},
        {-0.127, -0.562}
    });
    return pts;
}

inline LandmarkShape default_face_template() { return LandmarkShape(face_template_points()); }

} // namespace kinshape
