#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "kinshape/errors.hpp"

namespace kinshape {

// Dense row-major double matrix. Sized for this library's workloads
// (landmark shapes, m x m projectors, small MLP layers); plain loops,
// no BLAS ambitions.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        Matrix m(r, c);
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != c)
                throw shape_error("from_rows: ragged initializer");
            std::size_t j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    const std::vector<double>& values() const { return data_; }
    std::vector<double>& values() { return data_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {

inline std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw shape_error(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

} // namespace detail

inline Matrix operator+(const Matrix& a, const Matrix& b) {
    detail::require_same_shape(a, b, "add");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += b.values()[i];
    return out;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
    detail::require_same_shape(a, b, "sub");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] -= b.values()[i];
    return out;
}

inline Matrix operator*(double s, const Matrix& a) {
    Matrix out = a;
    for (double& v : out.values()) v *= s;
    return out;
}

inline Matrix operator-(const Matrix& a) { return -1.0 * a; }

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw shape_error("matmul: " + detail::shape_str(a) + " * " + detail::shape_str(b));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j)
                out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            out(j, i) = a(i, j);
    return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    detail::require_same_shape(a, b, "hadamard");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= b.values()[i];
    return out;
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
    double s = 0.0;
    for (double v : a.values()) s = std::max(s, std::abs(v));
    return s;
}

inline double trace(const Matrix& a) {
    if (a.rows() != a.cols())
        throw shape_error("trace: matrix not square (" + detail::shape_str(a) + ")");
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
    return s;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw shape_error("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
    if (a.cols() != x.size())
        throw shape_error("matvec: " + detail::shape_str(a) + " * vec" + std::to_string(x.size()));
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

// Subtract the mean row; rows of the result sum to zero per column.
inline Matrix center_rows(const Matrix& a) {
    Matrix out = a;
    if (a.rows() == 0) return out;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) mean += a(i, j);
        mean /= static_cast<double>(a.rows());
        for (std::size_t i = 0; i < a.rows(); ++i) out(i, j) -= mean;
    }
    return out;
}

} // namespace kinshape
