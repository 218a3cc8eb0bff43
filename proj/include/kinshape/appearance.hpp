#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "kinshape/errors.hpp"

namespace kinshape {

// A per-image appearance feature vector; the dimension is data-defined.
struct AppearanceVector {
    std::vector<double> values;

    explicit AppearanceVector(std::vector<double> v) : values(std::move(v)) {
        if (values.empty())
            throw invalid_input_error("appearance vector must have at least one entry");
        for (double x : values)
            if (!std::isfinite(x))
                throw invalid_input_error("appearance vector has a non-finite entry");
    }

    std::size_t dim() const { return values.size(); }
};

struct AppearanceGradients {
    std::vector<double> grad_a;
    std::vector<double> grad_b;
};

namespace detail {

inline void require_same_dim(std::size_t da, std::size_t db) {
    if (da != db)
        throw shape_error("appearance dimensions differ: " + std::to_string(da) + " vs " +
                          std::to_string(db));
}

} // namespace detail

// Element-wise product of the two appearance vectors; symmetric in its
// arguments.
inline AppearanceVector ac_forward(const AppearanceVector& a, const AppearanceVector& b) {
    detail::require_same_dim(a.dim(), b.dim());
    std::vector<double> out(a.dim());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = a.values[i] * b.values[i];
    return AppearanceVector(std::move(out));
}

// Product rule: d(a_i b_i)/da_i = b_i and vice versa.
inline AppearanceGradients ac_backward(const AppearanceVector& a, const AppearanceVector& b,
                                       const std::vector<double>& upstream) {
    detail::require_same_dim(a.dim(), b.dim());
    detail::require_same_dim(upstream.size(), a.dim());
    AppearanceGradients g;
    g.grad_a.resize(a.dim());
    g.grad_b.resize(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) {
        g.grad_a[i] = upstream[i] * b.values[i];
        g.grad_b[i] = upstream[i] * a.values[i];
    }
    return g;
}

// Optional preprocessing (off by default at the pipeline level): scale to
// unit Euclidean length. Zero vectors are left unchanged rather than
// divided by zero.
inline AppearanceVector l2_normalize(const AppearanceVector& a) {
    double n2 = 0.0;
    for (double x : a.values) n2 += x * x;
    const double n = std::sqrt(n2);
    if (n == 0.0) return a;
    std::vector<double> out(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a.values[i] / n;
    return AppearanceVector(std::move(out));
}

} // namespace kinshape
