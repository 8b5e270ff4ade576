#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ftcl/errors.hpp"
#include "ftcl/matrix.hpp"
#include "ftcl/rng.hpp"

namespace ftcl {

// MLP: flatten -> hidden layers with ReLU -> linear head to the feature dim.
struct EncoderArch {
    std::size_t input_dim = 784;
    std::vector<std::size_t> hidden_dims{512, 256};
    std::size_t feature_dim = 64;

    std::size_t layer_count() const { return hidden_dims.size() + 1; }

    // Dimension entering layer l.
    std::size_t in_dim(std::size_t l) const {
        return l == 0 ? input_dim : hidden_dims[l - 1];
    }
    // Dimension leaving layer l.
    std::size_t out_dim(std::size_t l) const {
        return l == hidden_dims.size() ? feature_dim : hidden_dims[l];
    }

    bool operator==(const EncoderArch&) const = default;
};

struct LayerParams {
    Matrix weight; // out x in
    std::vector<double> bias;
};

struct EncoderParams {
    EncoderArch arch;
    std::vector<LayerParams> layers;
};

// Gradients (or velocity buffers) mirroring EncoderParams layer shapes.
struct GradientSet {
    std::vector<LayerParams> layers;
};

inline bool shape_compatible(const EncoderParams& a, const EncoderParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (!a.layers[l].weight.same_shape(b.layers[l].weight)) return false;
        if (a.layers[l].bias.size() != b.layers[l].bias.size()) return false;
    }
    return true;
}

inline bool shape_compatible(const EncoderParams& p, const GradientSet& g) {
    if (p.layers.size() != g.layers.size()) return false;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        if (!p.layers[l].weight.same_shape(g.layers[l].weight)) return false;
        if (p.layers[l].bias.size() != g.layers[l].bias.size()) return false;
    }
    return true;
}

// Kaiming-uniform fan-in init: W ~ U(+-sqrt(6/fan_in)), b ~ U(+-1/sqrt(fan_in)).
inline EncoderParams init_encoder(const EncoderArch& arch, SeededRng& rng) {
    EncoderParams p;
    p.arch = arch;
    p.layers.resize(arch.layer_count());
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        const std::size_t in = arch.in_dim(l);
        const std::size_t out = arch.out_dim(l);
        auto& layer = p.layers[l];
        layer.weight = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        const double wb = std::sqrt(6.0 / static_cast<double>(in));
        for (std::size_t i = 0; i < out; ++i)
            for (std::size_t j = 0; j < in; ++j)
                layer.weight(i, j) = wb * (2.0 * rng.u01() - 1.0);
        const double bb = 1.0 / std::sqrt(static_cast<double>(in));
        for (std::size_t i = 0; i < out; ++i)
            layer.bias[i] = bb * (2.0 * rng.u01() - 1.0);
    }
    return p;
}

inline GradientSet zero_gradients(const EncoderParams& p) {
    GradientSet g;
    g.layers.resize(p.layers.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        g.layers[l].weight = Matrix(p.layers[l].weight.rows(), p.layers[l].weight.cols());
        g.layers[l].bias.assign(p.layers[l].bias.size(), 0.0);
    }
    return g;
}

// Activations captured by forward, sufficient for an exact backward pass.
// layer_inputs[l] is the (post-ReLU) input to layer l; layer_inputs[0] is the
// raw batch.
struct ForwardCache {
    std::vector<Matrix> layer_inputs;
};

// batch: B x input_dim -> embeddings B x feature_dim. Hidden layers apply
// ReLU; the head is linear.
inline Matrix encoder_forward(const EncoderParams& p, const Matrix& batch,
                              ForwardCache* cache = nullptr) {
    if (batch.cols() != p.arch.input_dim)
        throw ShapeMismatchError("encoder_forward: batch width != input dim");
    if (cache) {
        cache->layer_inputs.clear();
        cache->layer_inputs.reserve(p.layers.size());
    }
    Matrix x = batch;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        if (cache) cache->layer_inputs.push_back(x);
        Matrix z = matmul_nt(x, p.layers[l].weight);
        for (std::size_t i = 0; i < z.rows(); ++i) {
            auto zi = z.row(i);
            for (std::size_t j = 0; j < zi.size(); ++j) zi[j] += p.layers[l].bias[j];
        }
        const bool last = (l + 1 == p.layers.size());
        if (!last) {
            for (std::size_t i = 0; i < z.size(); ++i)
                if (z.data()[i] < 0.0) z.data()[i] = 0.0;
        }
        x = std::move(z);
    }
    return x;
}

// grad_wrt_h: B x feature_dim. Returns parameter gradients only; input
// gradients are not propagated past layer 0.
inline GradientSet encoder_backward(const EncoderParams& p, const ForwardCache& cache,
                                    const Matrix& grad_wrt_h) {
    if (cache.layer_inputs.size() != p.layers.size())
        throw StaleCacheError("encoder_backward: cache does not match parameter layout");
    if (grad_wrt_h.cols() != p.arch.feature_dim ||
        grad_wrt_h.rows() != cache.layer_inputs.front().rows())
        throw StaleCacheError("encoder_backward: gradient shape does not match cache");

    GradientSet g = zero_gradients(p);
    Matrix dz = grad_wrt_h;
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const Matrix& x = cache.layer_inputs[l];
        if (x.cols() != p.layers[l].weight.cols())
            throw StaleCacheError("encoder_backward: cached activation width mismatch");
        g.layers[l].weight = matmul_tn(dz, x);
        auto& db = g.layers[l].bias;
        for (std::size_t i = 0; i < dz.rows(); ++i) {
            auto r = dz.row(i);
            for (std::size_t j = 0; j < r.size(); ++j) db[j] += r[j];
        }
        if (l > 0) {
            Matrix dx = matmul(dz, p.layers[l].weight);
            // x is post-ReLU output of layer l-1, so the mask is x > 0.
            for (std::size_t i = 0; i < dx.size(); ++i)
                if (x.data()[i] <= 0.0) dx.data()[i] = 0.0;
            dz = std::move(dx);
        }
    }
    return g;
}

// Step-decay learning rate: base_lr scaled by decay_factor after each
// milestone (fractions of the total epoch budget).
struct LrSchedule {
    double base_lr = 0.03;
    double decay_factor = 0.1;
    std::vector<double> milestones{0.6, 0.8};

    double lr_at(std::size_t epoch, std::size_t total_epochs) const {
        double lr = base_lr;
        for (double m : milestones) {
            if (static_cast<double>(epoch) >= m * static_cast<double>(total_epochs))
                lr *= decay_factor;
        }
        return lr;
    }
};

struct OptimizerState {
    LrSchedule schedule;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    GradientSet velocity;

    static OptimizerState for_params(const EncoderParams& p, LrSchedule sched,
                                     double momentum, double weight_decay) {
        OptimizerState s;
        s.schedule = std::move(sched);
        s.momentum = momentum;
        s.weight_decay = weight_decay;
        s.velocity = zero_gradients(p);
        return s;
    }
};

// Momentum SGD with coupled weight decay:
//   v <- mu * v + g + wd * theta;  theta <- theta - lr * v
inline void sgd_step(EncoderParams& params, const GradientSet& grads, OptimizerState& opt,
                     double lr) {
    if (!shape_compatible(params, grads) || !shape_compatible(params, opt.velocity))
        throw ShapeMismatchError("sgd_step: parameter/gradient/velocity shapes disagree");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& w = params.layers[l].weight;
        auto& vw = opt.velocity.layers[l].weight;
        const auto& gw = grads.layers[l].weight;
        for (std::size_t i = 0; i < w.size(); ++i) {
            vw.data()[i] = opt.momentum * vw.data()[i] + gw.data()[i] +
                           opt.weight_decay * w.data()[i];
            w.data()[i] -= lr * vw.data()[i];
        }
        auto& b = params.layers[l].bias;
        auto& vb = opt.velocity.layers[l].bias;
        const auto& gb = grads.layers[l].bias;
        for (std::size_t i = 0; i < b.size(); ++i) {
            vb[i] = opt.momentum * vb[i] + gb[i] + opt.weight_decay * b[i];
            b[i] -= lr * vb[i];
        }
    }
}

// theta_k <- m * theta_k + (1 - m) * theta_q, elementwise.
inline EncoderParams momentum_update(EncoderParams theta_k, const EncoderParams& theta_q,
                                     double m) {
    if (m < 0.0 || m > 1.0)
        throw InvalidMomentumError("momentum_update: m must lie in [0, 1]");
    if (!shape_compatible(theta_k, theta_q))
        throw ShapeMismatchError("momentum_update: encoders are not shape-compatible");
    for (std::size_t l = 0; l < theta_k.layers.size(); ++l) {
        auto& kw = theta_k.layers[l].weight;
        const auto& qw = theta_q.layers[l].weight;
        for (std::size_t i = 0; i < kw.size(); ++i)
            kw.data()[i] = m * kw.data()[i] + (1.0 - m) * qw.data()[i];
        auto& kb = theta_k.layers[l].bias;
        const auto& qb = theta_q.layers[l].bias;
        for (std::size_t i = 0; i < kb.size(); ++i)
            kb[i] = m * kb[i] + (1.0 - m) * qb[i];
    }
    return theta_k;
}

} // namespace ftcl
