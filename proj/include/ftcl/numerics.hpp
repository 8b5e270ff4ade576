#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ftcl/errors.hpp"
#include "ftcl/matrix.hpp"

namespace ftcl {

// Below this, a vector counts as degenerate and cannot be projected onto the
// unit sphere (an untrained encoder can emit all-zero embeddings).
inline constexpr double kZeroVectorThreshold = 1e-12;

// A D-dimensional embedding. `normalized` asserts unit L2 norm; every
// feature in a run shares the same D.
struct FeatureVec {
    std::vector<double> values;
    bool normalized = false;

    std::size_t dim() const { return values.size(); }
};

inline double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Projects v onto the unit sphere in place.
inline void l2_normalize_inplace(std::span<double> v) {
    const double n = l2_norm(v);
    if (n < kZeroVectorThreshold)
        throw ZeroVectorError("l2_normalize: vector norm below 1e-12");
    const double inv = 1.0 / n;
    for (double& x : v) x *= inv;
}

inline FeatureVec l2_normalize(const FeatureVec& v) {
    FeatureVec out{v.values, true};
    l2_normalize_inplace(out.values);
    return out;
}

inline double dot(const FeatureVec& a, const FeatureVec& b) {
    if (a.dim() != b.dim())
        throw DimensionMismatchError("dot: feature dimensions disagree");
    return dot(std::span<const double>(a.values), std::span<const double>(b.values));
}

// Row-wise unit-sphere projection of a batch of embeddings.
inline void normalize_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) l2_normalize_inplace(m.row(i));
}

inline bool row_is_unit(std::span<const double> v, double eps = 1e-9) {
    return std::abs(l2_norm(v) - 1.0) <= eps;
}

} // namespace ftcl
