#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ftcl/contrastive.hpp"
#include "ftcl/errors.hpp"
#include "ftcl/matrix.hpp"
#include "ftcl/numerics.hpp"
#include "ftcl/rng.hpp"

namespace ftcl {

enum class PosFtMode { none, extrapolate, interpolate };
enum class NegFtMode { none, interpolate, extrapolate, extend };

// Hard-negative queue (one per query): lambda drawn from an asymmetric Beta.
struct HardNegativeConfig {
    bool enabled = false;
    double alpha = 2.0;
    double beta = 1.0;
};

struct FtConfig {
    PosFtMode pos_mode = PosFtMode::none;
    double alpha_ex = 2.0; // Beta shape for the positive transform
    NegFtMode neg_mode = NegFtMode::none;
    double alpha_in = 1.6; // Beta shape for the queue transform
    HardNegativeConfig hard;
    bool dimension_level = false; // per-dimension lambda vectors
    bool renormalize = true;      // re-project transformed features to the sphere
    std::size_t begin_epoch = 2;  // identity passthrough before this epoch
    bool per_entry_lambda = false; // scalar-mode queue transform: one lambda per entry

    bool any_enabled() const {
        return pos_mode != PosFtMode::none || neg_mode != NegFtMode::none || hard.enabled;
    }

    void validate() const {
        if (alpha_ex <= 0.0) throw ConfigError("ft.alpha_ex: must be > 0");
        if (alpha_in <= 0.0) throw ConfigError("ft.alpha_in: must be > 0");
        if (hard.enabled && (hard.alpha <= 0.0 || hard.beta <= 0.0))
            throw ConfigError("ft.hard_alpha/ft.hard_beta: must be > 0");
        if (hard.enabled && neg_mode != NegFtMode::none)
            throw ConfigError("ft.hard_negatives: exclusive with a queue transform neg_mode");
    }
};

enum class QueueProvenance { original, interpolated, extrapolated, unioned, hard };

struct TransformedQueue {
    Matrix entries;
    QueueProvenance provenance = QueueProvenance::original;
};

namespace detail {

// out = lambda * a + (1 - lambda) * b
inline void affine_combine(std::span<const double> a, std::span<const double> b, double lambda,
                           std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = lambda * a[i] + (1.0 - lambda) * b[i];
}

inline void check_pos_lambda_extrapolate(double lambda) {
    // Eq. 4 guarantees a score decrease only for lambda >= 1; the Beta(.,.)+1
    // draw lives in (1,2) and the closed endpoints are the identity/limit
    // cases exercised by tests.
    if (lambda < 1.0 || lambda > 2.0)
        throw LambdaOutOfRangeError("pos_extrapolate: lambda must lie in [1, 2]");
}

inline void check_pos_lambda_interpolate(double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw LambdaOutOfRangeError("pos_interpolate: lambda must lie in [0, 1]");
}

} // namespace detail

// Transformed positive-pair score as a function of the original score S:
//   S_hat = 2*lambda*(1-lambda)*(1-S) + S
// For lambda in (1,2) the value stays in [-4 + 5S, S].
inline double transformed_pos_score(double s, double lambda) {
    return 2.0 * lambda * (1.0 - lambda) * (1.0 - s) + s;
}

// Weighted addition pushing the two positive features apart (lambda > 1):
//   zq_hat = l*zq + (1-l)*zk,  zk_hat = l*zk + (1-l)*zq
inline std::pair<FeatureVec, FeatureVec> pos_extrapolate(const FeatureVec& z_q,
                                                         const FeatureVec& z_k_pos,
                                                         double lambda_ex,
                                                         bool renormalize = true) {
    if (z_q.dim() != z_k_pos.dim())
        throw DimensionMismatchError("pos_extrapolate: dimensions disagree");
    detail::check_pos_lambda_extrapolate(lambda_ex);
    FeatureVec q{std::vector<double>(z_q.dim()), false};
    FeatureVec k{std::vector<double>(z_q.dim()), false};
    detail::affine_combine(z_q.values, z_k_pos.values, lambda_ex, q.values);
    detail::affine_combine(z_k_pos.values, z_q.values, lambda_ex, k.values);
    if (renormalize) {
        l2_normalize_inplace(q.values);
        l2_normalize_inplace(k.values);
        q.normalized = k.normalized = true;
    }
    return {std::move(q), std::move(k)};
}

// Same affine combination with lambda in (0,1); raises the pair score
// (ablation operator).
inline std::pair<FeatureVec, FeatureVec> pos_interpolate(const FeatureVec& z_q,
                                                         const FeatureVec& z_k_pos,
                                                         double lambda_in,
                                                         bool renormalize = true) {
    if (z_q.dim() != z_k_pos.dim())
        throw DimensionMismatchError("pos_interpolate: dimensions disagree");
    detail::check_pos_lambda_interpolate(lambda_in);
    FeatureVec q{std::vector<double>(z_q.dim()), false};
    FeatureVec k{std::vector<double>(z_q.dim()), false};
    detail::affine_combine(z_q.values, z_k_pos.values, lambda_in, q.values);
    detail::affine_combine(z_k_pos.values, z_q.values, lambda_in, k.values);
    if (renormalize) {
        l2_normalize_inplace(q.values);
        l2_normalize_inplace(k.values);
        q.normalized = k.normalized = true;
    }
    return {std::move(q), std::move(k)};
}

namespace detail {

inline void check_perm(std::span<const std::size_t> perm, std::size_t n) {
    if (perm.size() != n)
        throw InvalidPermutationError("queue transform: permutation length != queue size");
    std::vector<bool> seen(n, false);
    for (std::size_t p : perm) {
        if (p >= n || seen[p])
            throw InvalidPermutationError("queue transform: not a bijection on queue indices");
        seen[p] = true;
    }
}

inline TransformedQueue mix_queue(const Matrix& z, double lambda,
                                  std::span<const std::size_t> perm, bool renormalize,
                                  QueueProvenance prov) {
    check_perm(perm, z.rows());
    TransformedQueue out;
    out.provenance = prov;
    out.entries = Matrix(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        affine_combine(z.row(i), z.row(perm[i]), lambda, out.entries.row(i));
        if (renormalize) l2_normalize_inplace(out.entries.row(i));
    }
    return out;
}

} // namespace detail

// Z_hat[i] = l * Z[i] + (1-l) * Z[perm[i]], lambda in (0,1). One lambda per
// step in scalar mode; fresh draws every step keep the negatives diversified.
inline TransformedQueue neg_interpolate_queue(const Matrix& queue, double lambda_in,
                                              std::span<const std::size_t> perm,
                                              bool renormalize = true) {
    if (lambda_in < 0.0 || lambda_in > 1.0)
        throw LambdaOutOfRangeError("neg_interpolate_queue: lambda must lie in [0, 1]");
    return detail::mix_queue(queue, lambda_in, perm, renormalize,
                             QueueProvenance::interpolated);
}

inline TransformedQueue neg_interpolate_queue(const MemoryQueue& queue, double lambda_in,
                                              std::span<const std::size_t> perm,
                                              bool renormalize = true) {
    return neg_interpolate_queue(queue.entries(), lambda_in, perm, renormalize);
}

// Same mixing with lambda in (1,2); the extrapolated points may leave the
// feature manifold (marginal gain in the source experiments).
inline TransformedQueue neg_extrapolate_queue(const Matrix& queue, double lambda_ex,
                                              std::span<const std::size_t> perm,
                                              bool renormalize = true) {
    if (lambda_ex < 1.0 || lambda_ex > 2.0)
        throw LambdaOutOfRangeError("neg_extrapolate_queue: lambda must lie in [1, 2]");
    return detail::mix_queue(queue, lambda_ex, perm, renormalize,
                             QueueProvenance::extrapolated);
}

inline TransformedQueue neg_extrapolate_queue(const MemoryQueue& queue, double lambda_ex,
                                              std::span<const std::size_t> perm,
                                              bool renormalize = true) {
    return neg_extrapolate_queue(queue.entries(), lambda_ex, perm, renormalize);
}

// Per-query hard negatives: Z_hard[i] = l * z_q + (1-l) * Z[i]. Raises every
// negative score: dot(z_q, Z_hard[i]) = l + (1-l) * S[i] >= S[i].
inline TransformedQueue hard_negatives(std::span<const double> z_q, const Matrix& queue,
                                       double lambda_in, bool renormalize = true) {
    if (lambda_in < 0.0 || lambda_in > 1.0)
        throw LambdaOutOfRangeError("hard_negatives: lambda must lie in [0, 1]");
    if (z_q.size() != queue.cols())
        throw DimensionMismatchError("hard_negatives: query dimension mismatch");
    TransformedQueue out;
    out.provenance = QueueProvenance::hard;
    out.entries = Matrix(queue.rows(), queue.cols());
    for (std::size_t i = 0; i < queue.rows(); ++i) {
        detail::affine_combine(z_q, queue.row(i), lambda_in, out.entries.row(i));
        if (renormalize) l2_normalize_inplace(out.entries.row(i));
    }
    return out;
}

enum class MixMode { interpolate, extrapolate };

// Dimension-level mixing (Hadamard combination): each coordinate gets its own
// mixing weight. z_hat_d = lambda_d * z_i_d + (1 - lambda_d) * z_j_d.
inline FeatureVec dim_mix(const FeatureVec& z_i, const FeatureVec& z_j,
                          std::span<const double> lambda_vec, MixMode mode) {
    if (z_i.dim() != z_j.dim() || lambda_vec.size() != z_i.dim())
        throw DimensionMismatchError("dim_mix: dimensions disagree");
    for (double l : lambda_vec) {
        if (mode == MixMode::interpolate) {
            if (l < 0.0 || l > 1.0)
                throw LambdaOutOfRangeError("dim_mix: lambda_d must lie in [0, 1]");
        } else if (l < 1.0 || l > 2.0) {
            throw LambdaOutOfRangeError("dim_mix: lambda_d must lie in [1, 2]");
        }
    }
    FeatureVec out{std::vector<double>(z_i.dim()), false};
    for (std::size_t d = 0; d < out.dim(); ++d)
        out.values[d] = lambda_vec[d] * z_i.values[d] + (1.0 - lambda_vec[d]) * z_j.values[d];
    return out;
}

// Union queue: transformed entries followed by the originals (2K rows).
inline TransformedQueue extend_queue(const TransformedQueue& transformed,
                                     const Matrix& original) {
    if (transformed.entries.rows() != original.rows() ||
        transformed.entries.cols() != original.cols())
        throw SizeMismatchError("extend_queue: transformed/original sizes disagree");
    TransformedQueue out;
    out.provenance = QueueProvenance::unioned;
    out.entries = Matrix(2 * original.rows(), original.cols());
    for (std::size_t i = 0; i < original.rows(); ++i) {
        auto src = transformed.entries.row(i);
        std::copy(src.begin(), src.end(), out.entries.row(i).begin());
    }
    for (std::size_t i = 0; i < original.rows(); ++i) {
        auto src = original.row(i);
        std::copy(src.begin(), src.end(), out.entries.row(original.rows() + i).begin());
    }
    return out;
}

inline TransformedQueue extend_queue(const TransformedQueue& transformed,
                                     const MemoryQueue& original) {
    return extend_queue(transformed, original.entries());
}

// All randomness consumed by one application of FT, drawn up front so the
// transform itself is a pure function (and so gradient checks can freeze it).
struct FtDraws {
    // scalar mode: one lambda per pair; dimension-level: B x D, row-major.
    std::vector<double> pos_lambda;
    // scalar mode: 1 (per step) or K (per entry); dimension-level: K x D.
    std::vector<double> neg_lambda;
    std::vector<std::size_t> perm; // queue permutation
    std::vector<double> hard_lambda; // one per query
};

inline FtDraws draw_ft(const FtConfig& cfg, std::size_t batch, std::size_t queue_size,
                       std::size_t dim, SeededRng& rng) {
    FtDraws d;
    if (cfg.pos_mode != PosFtMode::none) {
        const double shift = cfg.pos_mode == PosFtMode::extrapolate ? 1.0 : 0.0;
        const BetaSample spec{cfg.alpha_ex, cfg.alpha_ex, shift};
        const std::size_t n = cfg.dimension_level ? batch * dim : batch;
        d.pos_lambda.resize(n);
        for (auto& l : d.pos_lambda) l = sample_beta(spec, rng);
    }
    if (cfg.neg_mode != NegFtMode::none) {
        const double shift = cfg.neg_mode == NegFtMode::extrapolate ? 1.0 : 0.0;
        const BetaSample spec{cfg.alpha_in, cfg.alpha_in, shift};
        std::size_t n = 1;
        if (cfg.dimension_level) n = queue_size * dim;
        else if (cfg.per_entry_lambda) n = queue_size;
        d.neg_lambda.resize(n);
        for (auto& l : d.neg_lambda) l = sample_beta(spec, rng);
        d.perm = random_permutation(queue_size, rng);
    }
    if (cfg.hard.enabled) {
        const BetaSample spec{cfg.hard.alpha, cfg.hard.beta, 0.0};
        d.hard_lambda.resize(batch);
        for (auto& l : d.hard_lambda) l = sample_beta(spec, rng);
    }
    return d;
}

// Result of applying FT to one step's features. In hard-negative mode the
// per-query queues are not materialized here; callers build them row by row
// with hard_negatives() using `draws.hard_lambda`.
struct FtResult {
    bool active = false;    // false before begin_epoch or when nothing is enabled
    Matrix z_q;             // transformed queries (copy of input when inactive)
    Matrix z_k_pos;         // transformed positive keys
    Matrix negatives;       // effective negatives: K rows, 2K in extend mode
    bool hard_mode = false;
    FtDraws draws;
};

namespace detail {

inline void mix_rows_scalar(const Matrix& a, const Matrix& b, std::span<const double> lambda,
                            bool renormalize, Matrix& out) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
        affine_combine(a.row(i), b.row(i), lambda[i], out.row(i));
        if (renormalize) l2_normalize_inplace(out.row(i));
    }
}

inline void mix_rows_dim(const Matrix& a, const Matrix& b, std::span<const double> lambda_bd,
                         bool renormalize, Matrix& out) {
    const std::size_t dim = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ra = a.row(i);
        auto rb = b.row(i);
        auto ro = out.row(i);
        const double* l = lambda_bd.data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) ro[d] = l[d] * ra[d] + (1.0 - l[d]) * rb[d];
        if (renormalize) l2_normalize_inplace(ro);
    }
}

} // namespace detail

// Deterministic core: applies the configured transforms given frozen draws
// and an explicit active flag. Positive transform first, then the
// negative-queue transform.
inline FtResult apply_ft_core(bool active, const Matrix& z_q, const Matrix& z_k_pos,
                              const MemoryQueue& queue, const FtConfig& cfg, FtDraws draws) {
    cfg.validate();
    FtResult r;
    r.z_q = z_q;
    r.z_k_pos = z_k_pos;
    r.negatives = queue.entries();
    if (!active || !cfg.any_enabled()) {
        r.draws = std::move(draws);
        return r;
    }
    r.active = true;
    r.hard_mode = cfg.hard.enabled;

    if (cfg.pos_mode != PosFtMode::none) {
        Matrix tq(z_q.rows(), z_q.cols());
        Matrix tk(z_q.rows(), z_q.cols());
        if (cfg.dimension_level) {
            detail::mix_rows_dim(z_q, z_k_pos, draws.pos_lambda, cfg.renormalize, tq);
            detail::mix_rows_dim(z_k_pos, z_q, draws.pos_lambda, cfg.renormalize, tk);
        } else {
            detail::mix_rows_scalar(z_q, z_k_pos, draws.pos_lambda, cfg.renormalize, tq);
            detail::mix_rows_scalar(z_k_pos, z_q, draws.pos_lambda, cfg.renormalize, tk);
        }
        r.z_q = std::move(tq);
        r.z_k_pos = std::move(tk);
    }

    if (cfg.neg_mode != NegFtMode::none) {
        const Matrix& z = queue.entries();
        TransformedQueue t;
        if (cfg.dimension_level) {
            detail::check_perm(draws.perm, z.rows());
            t.entries = Matrix(z.rows(), z.cols());
            Matrix permuted(z.rows(), z.cols());
            for (std::size_t i = 0; i < z.rows(); ++i) {
                auto src = z.row(draws.perm[i]);
                std::copy(src.begin(), src.end(), permuted.row(i).begin());
            }
            detail::mix_rows_dim(z, permuted, draws.neg_lambda, cfg.renormalize, t.entries);
            t.provenance = cfg.neg_mode == NegFtMode::extrapolate
                               ? QueueProvenance::extrapolated
                               : QueueProvenance::interpolated;
        } else if (cfg.per_entry_lambda) {
            detail::check_perm(draws.perm, z.rows());
            t.entries = Matrix(z.rows(), z.cols());
            for (std::size_t i = 0; i < z.rows(); ++i) {
                detail::affine_combine(z.row(i), z.row(draws.perm[i]), draws.neg_lambda[i],
                                       t.entries.row(i));
                if (cfg.renormalize) l2_normalize_inplace(t.entries.row(i));
            }
            t.provenance = cfg.neg_mode == NegFtMode::extrapolate
                               ? QueueProvenance::extrapolated
                               : QueueProvenance::interpolated;
        } else if (cfg.neg_mode == NegFtMode::extrapolate) {
            t = neg_extrapolate_queue(z, draws.neg_lambda[0], draws.perm, cfg.renormalize);
        } else {
            t = neg_interpolate_queue(z, draws.neg_lambda[0], draws.perm, cfg.renormalize);
        }
        if (cfg.neg_mode == NegFtMode::extend) {
            r.negatives = extend_queue(t, z).entries;
        } else {
            r.negatives = std::move(t.entries);
        }
    }

    r.draws = std::move(draws);
    return r;
}

// Epoch-scheduled variant with frozen draws.
inline FtResult apply_ft_with_draws(std::size_t epoch, const Matrix& z_q, const Matrix& z_k_pos,
                                    const MemoryQueue& queue, const FtConfig& cfg,
                                    FtDraws draws) {
    return apply_ft_core(epoch >= cfg.begin_epoch, z_q, z_k_pos, queue, cfg, std::move(draws));
}

// Draws fresh lambdas/permutation for this step and applies the transforms.
// Before begin_epoch the input passes through untouched and nothing is drawn.
inline FtResult apply_ft(std::size_t epoch, const Matrix& z_q, const Matrix& z_k_pos,
                         const MemoryQueue& queue, const FtConfig& cfg, SeededRng& rng) {
    cfg.validate();
    FtDraws draws;
    if (epoch >= cfg.begin_epoch && cfg.any_enabled())
        draws = draw_ft(cfg, z_q.rows(), queue.capacity(), queue.dim(), rng);
    return apply_ft_with_draws(epoch, z_q, z_k_pos, queue, cfg, std::move(draws));
}

} // namespace ftcl
