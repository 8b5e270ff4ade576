#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ftcl/errors.hpp"

namespace ftcl {

// Dense row-major matrix of doubles. Rows are contiguous so the hot kernels
// below reduce to dot products / axpy over contiguous memory.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::size_t size() const { return data_.size(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    void fill(double v) { data_.assign(data_.size(), v); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Eight independent accumulator chains: fixed summation order (bitwise
// reproducible) without serializing on the add latency.
inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionMismatchError("dot: vectors have different dimensions");
    const std::size_t n = a.size();
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    double s4 = 0.0, s5 = 0.0, s6 = 0.0, s7 = 0.0;
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        s4 += a[i + 4] * b[i + 4];
        s5 += a[i + 5] * b[i + 5];
        s6 += a[i + 6] * b[i + 6];
        s7 += a[i + 7] * b[i + 7];
    }
    double s = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    const double* __restrict xp = x.data();
    double* __restrict yp = y.data();
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) yp[i] += a * xp[i];
}

// C = A * B, A: m x k, B: k x n
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionMismatchError("matmul: inner dimensions disagree");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            axpy(a(i, k), b.row(k), ci);
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

// C = A * B^T, A: m x k, B: n x k. Goes through an explicit transpose so the
// inner loops are axpy-shaped (vectorizable without reassociating any sum).
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionMismatchError("matmul_nt: inner dimensions disagree");
    return matmul(a, transpose(b));
}

// C = A^T * B, A: k x m, B: k x n
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionMismatchError("matmul_tn: inner dimensions disagree");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto bk = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            axpy(a(k, i), bk, c.row(i));
        }
    }
    return c;
}

} // namespace ftcl
