#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ftcl/errors.hpp"
#include "ftcl/matrix.hpp"
#include "ftcl/numerics.hpp"
#include "ftcl/rng.hpp"

namespace ftcl {

// Fixed-capacity FIFO ring of K unit-norm key features (the MoCo memory).
// Entries are detached copies; nothing written here ever sees a gradient.
class MemoryQueue {
public:
    MemoryQueue(std::size_t capacity, std::size_t dim)
        : store_(capacity, dim), capacity_(capacity), dim_(dim) {}

    // K random unit vectors; `filled` stays false until the first wrap.
    static MemoryQueue random_init(std::size_t capacity, std::size_t dim, SeededRng& rng) {
        MemoryQueue q(capacity, dim);
        for (std::size_t i = 0; i < capacity; ++i) {
            auto row = q.store_.row(i);
            for (auto& x : row) x = rng.normal();
            l2_normalize_inplace(row);
        }
        return q;
    }

    // FIFO overwrite of the oldest entries; the cursor advances by the batch
    // size mod K.
    void enqueue(const Matrix& keys) {
        if (keys.rows() > capacity_)
            throw BatchTooLargeError("queue_enqueue: batch larger than queue capacity");
        if (keys.cols() != dim_)
            throw DimensionMismatchError("queue_enqueue: key dimension mismatch");
        for (std::size_t i = 0; i < keys.rows(); ++i) {
            if (!row_is_unit(keys.row(i)))
                throw NotNormalizedError("queue_enqueue: keys must be unit-norm");
        }
        for (std::size_t i = 0; i < keys.rows(); ++i) {
            auto dst = store_.row(cursor_);
            auto src = keys.row(i);
            std::copy(src.begin(), src.end(), dst.begin());
            ++cursor_;
            if (cursor_ == capacity_) {
                cursor_ = 0;
                filled_ = true;
            }
        }
    }

    const Matrix& entries() const { return store_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t dim() const { return dim_; }
    std::size_t cursor() const { return cursor_; }
    bool filled() const { return filled_; }

private:
    Matrix store_;
    std::size_t capacity_;
    std::size_t dim_;
    std::size_t cursor_ = 0;
    bool filled_ = false;
};

// One positive score and K negative scores per query row.
struct ScoreSet {
    std::vector<double> pos; // B
    Matrix neg;              // B x K
};

// pos[i] = z_q[i] . z_k_pos[i], neg[i][j] = z_q[i] . negatives[j]
inline ScoreSet pair_scores(const Matrix& z_q, const Matrix& z_k_pos, const Matrix& negatives) {
    if (!z_q.same_shape(z_k_pos))
        throw DimensionMismatchError("pair_scores: query/key batch shapes disagree");
    if (negatives.cols() != z_q.cols())
        throw DimensionMismatchError("pair_scores: negative dimension mismatch");
    ScoreSet s;
    s.pos.resize(z_q.rows());
    for (std::size_t i = 0; i < z_q.rows(); ++i) s.pos[i] = dot(z_q.row(i), z_k_pos.row(i));
    s.neg = matmul_nt(z_q, negatives);
    return s;
}

// InfoNCE for one query: -log( e^{pos/tau} / (e^{pos/tau} + sum e^{neg/tau}) ),
// computed with a max shift.
inline double info_nce(double pos, std::span<const double> neg, double tau) {
    if (tau <= 0.0) throw InvalidTemperatureError("info_nce: tau must be positive");
    double mx = pos / tau;
    for (double n : neg) mx = std::max(mx, n / tau);
    double denom = std::exp(pos / tau - mx);
    for (double n : neg) denom += std::exp(n / tau - mx);
    return -(pos / tau - mx - std::log(denom));
}

struct ScoreGrad {
    double pos = 0.0;
    std::vector<double> neg;
};

// d/dpos = (p0 - 1)/tau <= 0, d/dneg_i = p_i/tau >= 0, where p is the softmax
// over all logits; the gradients sum to zero.
inline ScoreGrad info_nce_grad(double pos, std::span<const double> neg, double tau) {
    if (tau <= 0.0) throw InvalidTemperatureError("info_nce_grad: tau must be positive");
    double mx = pos / tau;
    for (double n : neg) mx = std::max(mx, n / tau);
    const double e0 = std::exp(pos / tau - mx);
    double denom = e0;
    ScoreGrad g;
    g.neg.resize(neg.size());
    for (std::size_t i = 0; i < neg.size(); ++i) {
        g.neg[i] = std::exp(neg[i] / tau - mx);
        denom += g.neg[i];
    }
    g.pos = (e0 / denom - 1.0) / tau;
    for (auto& v : g.neg) v = v / denom / tau;
    return g;
}

// Batch-mean loss.
inline double info_nce_mean(const ScoreSet& s, double tau) {
    double total = 0.0;
    for (std::size_t i = 0; i < s.pos.size(); ++i) total += info_nce(s.pos[i], s.neg.row(i), tau);
    return total / static_cast<double>(s.pos.size());
}

struct ScoreSetGrad {
    std::vector<double> pos; // B
    Matrix neg;              // B x K
};

// Gradients of the batch-mean loss (the 1/B factor is folded in).
inline ScoreSetGrad info_nce_mean_grad(const ScoreSet& s, double tau) {
    const double inv_b = 1.0 / static_cast<double>(s.pos.size());
    ScoreSetGrad g;
    g.pos.resize(s.pos.size());
    g.neg = Matrix(s.neg.rows(), s.neg.cols());
    for (std::size_t i = 0; i < s.pos.size(); ++i) {
        ScoreGrad row = info_nce_grad(s.pos[i], s.neg.row(i), tau);
        g.pos[i] = row.pos * inv_b;
        auto dst = g.neg.row(i);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = row.neg[j] * inv_b;
    }
    return g;
}

} // namespace ftcl
