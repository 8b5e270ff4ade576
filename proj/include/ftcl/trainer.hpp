#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ftcl/contrastive.hpp"
#include "ftcl/data.hpp"
#include "ftcl/encoder.hpp"
#include "ftcl/errors.hpp"
#include "ftcl/feature_transform.hpp"
#include "ftcl/matrix.hpp"
#include "ftcl/numerics.hpp"
#include "ftcl/rng.hpp"
#include "ftcl/run_config.hpp"
#include "ftcl/telemetry.hpp"

namespace ftcl {

// Backward of y = x / ||x||:  dx = dy/n - (dy.x) x / n^3
inline void renorm_backward(std::span<const double> x, std::span<const double> dy,
                            std::span<double> dx) {
    const double n = l2_norm(x);
    const double inv_n = 1.0 / n;
    double dyx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dyx += dy[i] * x[i];
    const double c = dyx * inv_n * inv_n * inv_n;
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = dy[i] * inv_n - c * x[i];
}

struct PipelineEval {
    double loss = 0.0;
    GradientSet grads;  // wrt the (query) encoder parameters
    ScoreSet scores;    // post-FT scores fed to the loss
    Matrix z_q;         // post-normalization, pre-FT query embeddings
};

// The momentum-queue composite loss as a pure function of the query
// parameters: encoder -> unit-sphere projection -> FT -> InfoNCE.
//
// Everything on the key side is a detached constant: z_k, the queue, and the
// z_q copy mixed into the transformed key / hard-negative queue. `frozen_z_q`
// pins that copy (finite-difference oracles pass the reference embeddings);
// when null, the live values are used, which is identical at the evaluation
// point — gradients never flow through it either way.
inline PipelineEval momentum_pipeline_eval(const EncoderParams& params_q, const Matrix& v_q,
                                           const Matrix& z_k, const MemoryQueue& queue,
                                           const FtConfig& ft_cfg, bool ft_active,
                                           const FtDraws& draws, double tau,
                                           bool want_grads = true,
                                           const Matrix* frozen_z_q = nullptr) {
    const std::size_t bsz = v_q.rows();
    const std::size_t dim = params_q.arch.feature_dim;

    ForwardCache cache;
    Matrix h_q = encoder_forward(params_q, v_q, want_grads ? &cache : nullptr);
    Matrix z_q = h_q;
    normalize_rows(z_q);
    const Matrix& z_q_detached = frozen_z_q ? *frozen_z_q : z_q;

    PipelineEval out;
    const bool pos_active = ft_active && ft_cfg.pos_mode != PosFtMode::none;
    const bool hard_active = ft_active && ft_cfg.hard.enabled;

    // positive transform (query side live, key side from detached values)
    Matrix zq_hat = z_q;
    Matrix zk_hat = z_k;
    if (pos_active) {
        zq_hat = Matrix(bsz, dim);
        zk_hat = Matrix(bsz, dim);
        for (std::size_t i = 0; i < bsz; ++i) {
            auto zq_i = z_q.row(i);
            auto zqd_i = z_q_detached.row(i);
            auto zk_i = z_k.row(i);
            auto oq = zq_hat.row(i);
            auto ok = zk_hat.row(i);
            if (ft_cfg.dimension_level) {
                const double* lam = draws.pos_lambda.data() + i * dim;
                for (std::size_t d = 0; d < dim; ++d) {
                    oq[d] = lam[d] * zq_i[d] + (1.0 - lam[d]) * zk_i[d];
                    ok[d] = lam[d] * zk_i[d] + (1.0 - lam[d]) * zqd_i[d];
                }
            } else {
                const double lam = draws.pos_lambda[i];
                for (std::size_t d = 0; d < dim; ++d) {
                    oq[d] = lam * zq_i[d] + (1.0 - lam) * zk_i[d];
                    ok[d] = lam * zk_i[d] + (1.0 - lam) * zqd_i[d];
                }
            }
            if (ft_cfg.renormalize) {
                l2_normalize_inplace(oq);
                l2_normalize_inplace(ok);
            }
        }
    }

    // negative set (entirely detached)
    Matrix negatives = queue.entries();
    std::vector<Matrix> hard_queues;
    if (ft_active && ft_cfg.neg_mode != NegFtMode::none) {
        FtResult nt = apply_ft_core(true, z_q, z_k, queue,
                                    [&] {
                                        FtConfig c = ft_cfg;
                                        c.pos_mode = PosFtMode::none;
                                        c.hard.enabled = false;
                                        return c;
                                    }(),
                                    draws);
        negatives = std::move(nt.negatives);
    } else if (hard_active) {
        hard_queues.reserve(bsz);
        for (std::size_t i = 0; i < bsz; ++i)
            hard_queues.push_back(hard_negatives(z_q_detached.row(i), queue.entries(),
                                                 draws.hard_lambda[i], ft_cfg.renormalize)
                                      .entries);
    }

    // scores and loss: the transformed pair feeds the positive logit; the
    // negative logits pair the ORIGINAL query with the (transformed) queue.
    ScoreSet scores;
    scores.pos.resize(bsz);
    for (std::size_t i = 0; i < bsz; ++i) scores.pos[i] = dot(zq_hat.row(i), zk_hat.row(i));
    if (hard_active) {
        scores.neg = Matrix(bsz, queue.capacity());
        for (std::size_t i = 0; i < bsz; ++i) {
            auto row = scores.neg.row(i);
            for (std::size_t j = 0; j < queue.capacity(); ++j)
                row[j] = dot(z_q.row(i), hard_queues[i].row(j));
        }
    } else {
        scores.neg = matmul_nt(z_q, negatives);
    }
    out.loss = info_nce_mean(scores, tau);
    out.scores = std::move(scores);
    out.z_q = std::move(z_q);
    if (!want_grads) return out;

    const ScoreSetGrad sg = info_nce_mean_grad(out.scores, tau);

    // negative path: d loss / d z_q directly (negatives detached)
    Matrix d_zq(bsz, dim);
    if (hard_active) {
        for (std::size_t i = 0; i < bsz; ++i) {
            auto dst = d_zq.row(i);
            auto g = sg.neg.row(i);
            for (std::size_t j = 0; j < queue.capacity(); ++j)
                axpy(g[j], hard_queues[i].row(j), dst);
        }
    } else {
        d_zq = matmul(sg.neg, negatives);
    }

    // positive path: through zq_hat = renorm(l*z_q + (1-l)*const)
    if (pos_active) {
        std::vector<double> u(dim), du(dim), d_zq_hat(dim);
        for (std::size_t i = 0; i < bsz; ++i) {
            auto zq_i = out.z_q.row(i);
            auto zk_i = z_k.row(i);
            for (std::size_t d = 0; d < dim; ++d) d_zq_hat[d] = sg.pos[i] * zk_hat(i, d);
            if (ft_cfg.dimension_level) {
                const double* lam = draws.pos_lambda.data() + i * dim;
                for (std::size_t d = 0; d < dim; ++d)
                    u[d] = lam[d] * zq_i[d] + (1.0 - lam[d]) * zk_i[d];
                if (ft_cfg.renormalize) renorm_backward(u, d_zq_hat, du);
                else du = d_zq_hat;
                auto dst = d_zq.row(i);
                for (std::size_t d = 0; d < dim; ++d) dst[d] += lam[d] * du[d];
            } else {
                const double lam = draws.pos_lambda[i];
                for (std::size_t d = 0; d < dim; ++d)
                    u[d] = lam * zq_i[d] + (1.0 - lam) * zk_i[d];
                if (ft_cfg.renormalize) renorm_backward(u, d_zq_hat, du);
                else du = d_zq_hat;
                auto dst = d_zq.row(i);
                for (std::size_t d = 0; d < dim; ++d) dst[d] += lam * du[d];
            }
        }
    } else {
        for (std::size_t i = 0; i < bsz; ++i) axpy(sg.pos[i], zk_hat.row(i), d_zq.row(i));
    }

    // through the unit-sphere projection of h_q
    Matrix d_hq(bsz, dim);
    for (std::size_t i = 0; i < bsz; ++i) renorm_backward(h_q.row(i), d_zq.row(i), d_hq.row(i));

    out.grads = encoder_backward(params_q, cache, d_hq);
    return out;
}

// The in-batch (shared encoder) composite loss. x_stacked holds both views:
// rows [0,B) and [B,2B) pair up. Gradients flow through anchors, positives
// and negatives alike.
inline PipelineEval in_batch_pipeline_eval(const EncoderParams& params, const Matrix& x_stacked,
                                           const FtConfig& ft_cfg, bool ft_active,
                                           const FtDraws& draws, double tau,
                                           bool want_grads = true) {
    const std::size_t n2 = x_stacked.rows();
    const std::size_t bsz = n2 / 2;
    const std::size_t dim = params.arch.feature_dim;
    auto partner = [bsz, n2](std::size_t i) { return (i + bsz) % n2; };

    ForwardCache cache;
    Matrix h = encoder_forward(params, x_stacked, want_grads ? &cache : nullptr);
    Matrix z = h;
    normalize_rows(z);

    const bool pos_active = ft_active && ft_cfg.pos_mode != PosFtMode::none;
    const bool neg_active = ft_active && ft_cfg.neg_mode != NegFtMode::none;

    Matrix z_hat = z;
    if (pos_active) {
        for (std::size_t i = 0; i < bsz; ++i) {
            auto za = z.row(i);
            auto zb = z.row(bsz + i);
            auto oa = z_hat.row(i);
            auto ob = z_hat.row(bsz + i);
            if (ft_cfg.dimension_level) {
                const double* lam = draws.pos_lambda.data() + i * dim;
                for (std::size_t d = 0; d < dim; ++d) {
                    oa[d] = lam[d] * za[d] + (1.0 - lam[d]) * zb[d];
                    ob[d] = lam[d] * zb[d] + (1.0 - lam[d]) * za[d];
                }
            } else {
                const double lam = draws.pos_lambda[i];
                for (std::size_t d = 0; d < dim; ++d) {
                    oa[d] = lam * za[d] + (1.0 - lam) * zb[d];
                    ob[d] = lam * zb[d] + (1.0 - lam) * za[d];
                }
            }
            if (ft_cfg.renormalize) {
                l2_normalize_inplace(oa);
                l2_normalize_inplace(ob);
            }
        }
    }

    // negatives: the in-batch embeddings, optionally mixed with a per-step
    // permutation of themselves (plus the originals in extend mode)
    Matrix negatives = z;
    if (neg_active) {
        Matrix mixed(n2, dim);
        const bool per_entry = !ft_cfg.dimension_level && draws.neg_lambda.size() > 1;
        for (std::size_t j = 0; j < n2; ++j) {
            auto zj = z.row(j);
            auto zp = z.row(draws.perm[j]);
            auto oj = mixed.row(j);
            if (ft_cfg.dimension_level) {
                const double* lam = draws.neg_lambda.data() + j * dim;
                for (std::size_t d = 0; d < dim; ++d)
                    oj[d] = lam[d] * zj[d] + (1.0 - lam[d]) * zp[d];
            } else {
                const double lam = per_entry ? draws.neg_lambda[j] : draws.neg_lambda[0];
                for (std::size_t d = 0; d < dim; ++d)
                    oj[d] = lam * zj[d] + (1.0 - lam) * zp[d];
            }
            if (ft_cfg.renormalize) l2_normalize_inplace(oj);
        }
        if (ft_cfg.neg_mode == NegFtMode::extend) {
            Matrix unioned(2 * n2, dim);
            for (std::size_t j = 0; j < n2; ++j) {
                std::copy(mixed.row(j).begin(), mixed.row(j).end(), unioned.row(j).begin());
                std::copy(z.row(j).begin(), z.row(j).end(), unioned.row(n2 + j).begin());
            }
            negatives = std::move(unioned);
        } else {
            negatives = std::move(mixed);
        }
    }

    // each anchor excludes itself and its positive by source index; the
    // positive logit uses the transformed pair, the negative logits pair the
    // ORIGINAL anchor embedding with the (transformed) negative set
    const std::size_t cand = negatives.rows();
    const std::size_t neg_width = cand - (cand / n2) * 2;
    PipelineEval out;
    out.scores.pos.resize(n2);
    out.scores.neg = Matrix(n2, neg_width);
    std::vector<std::vector<std::size_t>> neg_idx(n2);
    for (std::size_t a = 0; a < n2; ++a) {
        out.scores.pos[a] = dot(z_hat.row(a), z_hat.row(partner(a)));
        auto row = out.scores.neg.row(a);
        auto& idx = neg_idx[a];
        idx.reserve(neg_width);
        for (std::size_t j = 0; j < cand; ++j) {
            const std::size_t src = j % n2;
            if (src == a || src == partner(a)) continue;
            idx.push_back(j);
            row[idx.size() - 1] = dot(z.row(a), negatives.row(j));
        }
    }
    out.loss = info_nce_mean(out.scores, tau);
    out.z_q = z;
    if (!want_grads) return out;

    const ScoreSetGrad sg = info_nce_mean_grad(out.scores, tau);
    Matrix d_zhat(n2, dim); // gradient reaching the transformed pair features
    Matrix d_neg(cand, dim);
    Matrix d_z(n2, dim);    // gradient reaching the plain embeddings
    for (std::size_t a = 0; a < n2; ++a) {
        axpy(sg.pos[a], z_hat.row(partner(a)), d_zhat.row(a));
        axpy(sg.pos[a], z_hat.row(a), d_zhat.row(partner(a)));
        auto g = sg.neg.row(a);
        const auto& idx = neg_idx[a];
        for (std::size_t s = 0; s < idx.size(); ++s) {
            axpy(g[s], negatives.row(idx[s]), d_z.row(a));
            axpy(g[s], z.row(a), d_neg.row(idx[s]));
        }
    }

    std::vector<double> u(dim), du(dim);
    if (pos_active) {
        for (std::size_t i = 0; i < bsz; ++i) {
            for (int side = 0; side < 2; ++side) {
                const std::size_t a = side == 0 ? i : bsz + i;
                const std::size_t b = partner(a);
                auto za = z.row(a);
                auto zb = z.row(b);
                if (ft_cfg.dimension_level) {
                    const double* lam = draws.pos_lambda.data() + i * dim;
                    for (std::size_t d = 0; d < dim; ++d)
                        u[d] = lam[d] * za[d] + (1.0 - lam[d]) * zb[d];
                    if (ft_cfg.renormalize) renorm_backward(u, d_zhat.row(a), du);
                    else std::copy(d_zhat.row(a).begin(), d_zhat.row(a).end(), du.begin());
                    auto da = d_z.row(a);
                    auto db = d_z.row(b);
                    for (std::size_t d = 0; d < dim; ++d) {
                        da[d] += lam[d] * du[d];
                        db[d] += (1.0 - lam[d]) * du[d];
                    }
                } else {
                    const double lam = draws.pos_lambda[i];
                    for (std::size_t d = 0; d < dim; ++d)
                        u[d] = lam * za[d] + (1.0 - lam) * zb[d];
                    if (ft_cfg.renormalize) renorm_backward(u, d_zhat.row(a), du);
                    else std::copy(d_zhat.row(a).begin(), d_zhat.row(a).end(), du.begin());
                    axpy(lam, du, d_z.row(a));
                    axpy(1.0 - lam, du, d_z.row(b));
                }
            }
        }
    } else {
        for (std::size_t a = 0; a < n2; ++a) axpy(1.0, d_zhat.row(a), d_z.row(a));
    }

    if (neg_active) {
        const bool per_entry = !ft_cfg.dimension_level && draws.neg_lambda.size() > 1;
        for (std::size_t j = 0; j < n2; ++j) {
            auto zj = z.row(j);
            auto zp = z.row(draws.perm[j]);
            if (ft_cfg.dimension_level) {
                const double* lam = draws.neg_lambda.data() + j * dim;
                for (std::size_t d = 0; d < dim; ++d)
                    u[d] = lam[d] * zj[d] + (1.0 - lam[d]) * zp[d];
                if (ft_cfg.renormalize) renorm_backward(u, d_neg.row(j), du);
                else std::copy(d_neg.row(j).begin(), d_neg.row(j).end(), du.begin());
                auto dj = d_z.row(j);
                auto dp = d_z.row(draws.perm[j]);
                for (std::size_t d = 0; d < dim; ++d) {
                    dj[d] += lam[d] * du[d];
                    dp[d] += (1.0 - lam[d]) * du[d];
                }
            } else {
                const double lam = per_entry ? draws.neg_lambda[j] : draws.neg_lambda[0];
                for (std::size_t d = 0; d < dim; ++d)
                    u[d] = lam * zj[d] + (1.0 - lam) * zp[d];
                if (ft_cfg.renormalize) renorm_backward(u, d_neg.row(j), du);
                else std::copy(d_neg.row(j).begin(), d_neg.row(j).end(), du.begin());
                axpy(lam, du, d_z.row(j));
                axpy(1.0 - lam, du, d_z.row(draws.perm[j]));
            }
        }
        if (ft_cfg.neg_mode == NegFtMode::extend) {
            for (std::size_t j = 0; j < n2; ++j) axpy(1.0, d_neg.row(n2 + j), d_z.row(j));
        }
    } else {
        for (std::size_t j = 0; j < n2; ++j) axpy(1.0, d_neg.row(j), d_z.row(j));
    }

    Matrix d_h(n2, dim);
    for (std::size_t i = 0; i < n2; ++i) renorm_backward(h.row(i), d_z.row(i), d_h.row(i));
    out.grads = encoder_backward(params, cache, d_h);
    return out;
}

struct StepOutcome {
    double loss = 0.0;
};

// Owns all mutable training state (encoders, optimizer, queue, telemetry).
// Steps are strictly sequential; determinism comes from per-purpose RNG
// streams keyed on (seed, epoch, sample/step), so batch order, telemetry and
// FT on/off cannot shift each other's draws.
class Trainer {
public:
    Trainer(RunConfig cfg, const Dataset& data)
        : cfg_(std::move(cfg)),
          data_(&data),
          rng_(cfg_.train.seed),
          queue_(1, 1) {
        cfg_.validate();
        arch_ = EncoderArch{data.dim(), cfg_.model.hidden_dims, cfg_.model.feature_dim};
        SeededRng init_rng = rng_.stream(RngStream::encoder_init);
        params_q_ = init_encoder(arch_, init_rng);
        params_k_ = params_q_; // key encoder starts as an exact copy
        opt_ = OptimizerState::for_params(params_q_, cfg_.opt.schedule(), cfg_.opt.momentum,
                                          cfg_.opt.weight_decay);
        if (cfg_.train.mode == TrainMode::momentum_queue) {
            SeededRng qrng = rng_.stream(RngStream::queue_init);
            queue_ = MemoryQueue::random_init(cfg_.train.queue_size, arch_.feature_dim, qrng);
        }
        if (data.size() < cfg_.train.batch_size)
            throw ConfigError("train.batch_size: larger than the dataset");
    }

    StepOutcome training_step(std::span<const std::size_t> indices, std::size_t epoch) {
        StepOutcome out = cfg_.train.mode == TrainMode::momentum_queue
                              ? momentum_step(indices, epoch)
                              : in_batch_step(indices, epoch);
        loss_trace_.push_back(out.loss);
        ++global_step_;
        ++steps_this_epoch_;
        return out;
    }

    double run_epoch(std::size_t epoch) {
        SeededRng shuffle_rng = rng_.stream(RngStream::shuffle, epoch);
        const auto order = random_permutation(data_->size(), shuffle_rng);
        const std::size_t bsz = cfg_.train.batch_size;
        const std::size_t steps = data_->size() / bsz; // final partial batch dropped
        steps_this_epoch_ = 0;
        double total = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            std::span<const std::size_t> batch(order.data() + s * bsz, bsz);
            total += training_step(batch, epoch).loss;
        }
        return total / static_cast<double>(steps);
    }

    // Full pretraining; returns the per-step loss trace.
    const std::vector<double>& run() {
        for (std::size_t e = 0; e < cfg_.train.epochs; ++e) run_epoch(e);
        telemetry_.finish();
        return loss_trace_;
    }

    const RunConfig& config() const { return cfg_; }
    const EncoderArch& arch() const { return arch_; }
    const EncoderParams& params_q() const { return params_q_; }
    const EncoderParams& params_k() const { return params_k_; }
    const OptimizerState& optimizer() const { return opt_; }
    const MemoryQueue& queue() const { return queue_; }
    TelemetryLog& telemetry() { return telemetry_; }
    const TelemetryLog& telemetry() const { return telemetry_; }
    const std::vector<double>& loss_trace() const { return loss_trace_; }
    std::uint64_t global_step() const { return global_step_; }

    // Builds the two augmented views for a batch; keyed by (epoch, sample).
    void make_views(std::span<const std::size_t> indices, std::size_t epoch, Matrix& v_q,
                    Matrix& v_k) const {
        const std::size_t d = data_->dim();
        v_q = Matrix(indices.size(), d);
        v_k = Matrix(indices.size(), d);
        for (std::size_t b = 0; b < indices.size(); ++b) {
            SeededRng arng = rng_.stream(RngStream::augment, epoch, indices[b]);
            ViewPair vp = two_view_augment(data_->samples.row(indices[b]), arng, cfg_.aug);
            std::copy(vp.v_q.begin(), vp.v_q.end(), v_q.row(b).begin());
            std::copy(vp.v_k.begin(), vp.v_k.end(), v_k.row(b).begin());
        }
    }

private:
    // Post-FT statistics over the first n = min(sample_n, B) queries.
    void record_post_scores(const ScoreSet& post, std::size_t epoch) {
        if (!cfg_.telemetry.enabled) return;
        const std::size_t n = std::min(cfg_.telemetry.sample_n, post.pos.size());
        Matrix neg_sub(n, post.neg.cols());
        for (std::size_t i = 0; i < n; ++i) {
            auto src = post.neg.row(i);
            std::copy(src.begin(), src.end(), neg_sub.row(i).begin());
        }
        telemetry_.add_scores(record_score_stats(
            std::span<const double>(post.pos.data(), n), neg_sub, global_step_, epoch, false));
    }

    void record_pre_scores(std::span<const double> pos_pre, const Matrix& neg_pre,
                           std::size_t epoch) {
        telemetry_.add_scores(record_score_stats(pos_pre, neg_pre, global_step_, epoch, true));
    }

    StepOutcome momentum_step(std::span<const std::size_t> indices, std::size_t epoch) {
        const std::size_t bsz = indices.size();
        Matrix v_q, v_k;
        make_views(indices, epoch, v_q, v_k);

        Matrix h_k = encoder_forward(params_k_, v_k); // key side: no gradients
        Matrix z_k = h_k;
        normalize_rows(z_k);

        const bool ft_active = epoch >= cfg_.train.ft.begin_epoch && cfg_.train.ft.any_enabled();
        SeededRng ft_rng = rng_.stream(RngStream::feature_transform, epoch, steps_this_epoch_);
        FtDraws draws;
        if (ft_active)
            draws = draw_ft(cfg_.train.ft, bsz, queue_.capacity(), arch_.feature_dim, ft_rng);

        PipelineEval eval = momentum_pipeline_eval(params_q_, v_q, z_k, queue_, cfg_.train.ft,
                                                   ft_active, draws, cfg_.train.tau);
        if (!std::isfinite(eval.loss))
            throw NumericError("training_step: non-finite loss", global_step_);

        record_post_scores(eval.scores, epoch);
        if (cfg_.telemetry.enabled && cfg_.telemetry.log_pre_ft) {
            const std::size_t n = std::min(cfg_.telemetry.sample_n, bsz);
            std::vector<double> pos_pre(n);
            Matrix zq_sub(n, arch_.feature_dim);
            for (std::size_t i = 0; i < n; ++i) {
                pos_pre[i] = dot(eval.z_q.row(i), z_k.row(i));
                auto src = eval.z_q.row(i);
                std::copy(src.begin(), src.end(), zq_sub.row(i).begin());
            }
            record_pre_scores(pos_pre, matmul_nt(zq_sub, queue_.entries()), epoch);
        }
        if (cfg_.telemetry.enabled) telemetry_.add_step_grads(eval.grads, epoch);

        const double lr = opt_.schedule.lr_at(epoch, cfg_.train.epochs);
        sgd_step(params_q_, eval.grads, opt_, lr);
        params_k_ = momentum_update(std::move(params_k_), params_q_, cfg_.train.momentum_m);
        queue_.enqueue(z_k);
        return {eval.loss};
    }

    StepOutcome in_batch_step(std::span<const std::size_t> indices, std::size_t epoch) {
        const std::size_t bsz = indices.size();
        const std::size_t n2 = 2 * bsz;
        Matrix v_q, v_k;
        make_views(indices, epoch, v_q, v_k);
        Matrix x(n2, data_->dim());
        for (std::size_t i = 0; i < bsz; ++i) {
            std::copy(v_q.row(i).begin(), v_q.row(i).end(), x.row(i).begin());
            std::copy(v_k.row(i).begin(), v_k.row(i).end(), x.row(bsz + i).begin());
        }

        const bool ft_active = epoch >= cfg_.train.ft.begin_epoch && cfg_.train.ft.any_enabled();
        SeededRng ft_rng = rng_.stream(RngStream::feature_transform, epoch, steps_this_epoch_);
        FtDraws draws;
        if (ft_active) draws = draw_ft(cfg_.train.ft, bsz, n2, arch_.feature_dim, ft_rng);

        PipelineEval eval =
            in_batch_pipeline_eval(params_q_, x, cfg_.train.ft, ft_active, draws, cfg_.train.tau);
        if (!std::isfinite(eval.loss))
            throw NumericError("training_step: non-finite loss", global_step_);

        record_post_scores(eval.scores, epoch);
        if (cfg_.telemetry.enabled && cfg_.telemetry.log_pre_ft) {
            const Matrix& z = eval.z_q;
            auto partner = [bsz, n2](std::size_t i) { return (i + bsz) % n2; };
            const std::size_t n = std::min(cfg_.telemetry.sample_n, n2);
            std::vector<double> pos_pre(n);
            Matrix neg_pre(n, n2 - 2);
            for (std::size_t a = 0; a < n; ++a) {
                pos_pre[a] = dot(z.row(a), z.row(partner(a)));
                auto row = neg_pre.row(a);
                std::size_t s = 0;
                for (std::size_t j = 0; j < n2; ++j) {
                    if (j == a || j == partner(a)) continue;
                    row[s++] = dot(z.row(a), z.row(j));
                }
            }
            record_pre_scores(pos_pre, neg_pre, epoch);
        }
        if (cfg_.telemetry.enabled) telemetry_.add_step_grads(eval.grads, epoch);

        const double lr = opt_.schedule.lr_at(epoch, cfg_.train.epochs);
        sgd_step(params_q_, eval.grads, opt_, lr);
        return {eval.loss};
    }

    RunConfig cfg_;
    const Dataset* data_;
    SeededRng rng_;
    EncoderArch arch_;
    EncoderParams params_q_;
    EncoderParams params_k_;
    OptimizerState opt_;
    MemoryQueue queue_;
    TelemetryLog telemetry_;
    std::vector<double> loss_trace_;
    std::uint64_t global_step_ = 0;
    std::size_t steps_this_epoch_ = 0;
};

} // namespace ftcl
