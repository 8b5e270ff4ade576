#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "ftcl/data.hpp"
#include "ftcl/encoder.hpp"
#include "ftcl/errors.hpp"
#include "ftcl/matrix.hpp"
#include "ftcl/numerics.hpp"
#include "ftcl/rng.hpp"

namespace ftcl {

// Linear softmax classifier on frozen features.
struct LinearProbe {
    Matrix weight; // classes x D
    std::vector<double> bias;
};

struct ProbeConfig {
    double lr = 1.0;
    std::size_t epochs = 100;
    std::size_t batch_size = 256;
    double momentum = 0.9;
    double decay_factor = 0.1;
    std::vector<double> decay_at{0.6, 0.8};
};

// Frozen-encoder feature extraction; rows are L2-normalized to match the
// representation the contrastive loss shaped.
inline Matrix extract_features(const EncoderParams& encoder, const Matrix& samples) {
    Matrix f = encoder_forward(encoder, samples);
    normalize_rows(f);
    return f;
}

inline Matrix extract_features(const EncoderParams& encoder, const Dataset& data) {
    return extract_features(encoder, data.samples);
}

inline std::vector<double> probe_logits(const LinearProbe& probe, std::span<const double> feature) {
    std::vector<double> logits(probe.weight.rows());
    for (std::size_t c = 0; c < probe.weight.rows(); ++c)
        logits[c] = dot(probe.weight.row(c), feature) + probe.bias[c];
    return logits;
}

// Argmax with deterministic tie-break on the lowest class index.
inline int probe_predict(const LinearProbe& probe, std::span<const double> feature) {
    const auto logits = probe_logits(probe, feature);
    int best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
        if (logits[c] > logits[best]) best = static_cast<int>(c);
    return best;
}

// Multinomial logistic regression by minibatch SGD. Features are frozen; the
// caller guarantees the encoder is untouched.
inline LinearProbe fit_linear_probe(const Matrix& features, std::span<const int> labels,
                                    const ProbeConfig& cfg, SeededRng rng) {
    if (features.rows() != labels.size())
        throw ShapeMismatchError("fit_linear_probe: feature/label counts disagree");
    int classes = 0;
    for (int l : labels) classes = std::max(classes, l + 1);
    bool multi = false;
    for (int l : labels)
        if (l != labels[0]) { multi = true; break; }
    if (!multi)
        throw DegenerateLabelsError("fit_linear_probe: need at least two classes present");

    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    const auto c = static_cast<std::size_t>(classes);

    LinearProbe probe;
    probe.weight = Matrix(c, d, 0.0);
    probe.bias.assign(c, 0.0);
    Matrix vel_w(c, d, 0.0);
    std::vector<double> vel_b(c, 0.0);

    Matrix gw(c, d);
    std::vector<double> gb(c);
    std::vector<double> logits(c);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cfg.lr;
        for (double m : cfg.decay_at)
            if (static_cast<double>(epoch) >= m * static_cast<double>(cfg.epochs))
                lr *= cfg.decay_factor;
        SeededRng shuffle_rng = rng.stream(RngStream::probe, epoch);
        const auto order = random_permutation(n, shuffle_rng);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, n);
            const auto bsz = static_cast<double>(end - start);
            gw.fill(0.0);
            std::fill(gb.begin(), gb.end(), 0.0);
            for (std::size_t bi = start; bi < end; ++bi) {
                const std::size_t i = order[bi];
                auto x = features.row(i);
                double mx = -1e300;
                for (std::size_t k = 0; k < c; ++k) {
                    logits[k] = dot(probe.weight.row(k), x) + probe.bias[k];
                    mx = std::max(mx, logits[k]);
                }
                double denom = 0.0;
                for (std::size_t k = 0; k < c; ++k) {
                    logits[k] = std::exp(logits[k] - mx);
                    denom += logits[k];
                }
                for (std::size_t k = 0; k < c; ++k) {
                    const double p = logits[k] / denom;
                    const double g = p - (static_cast<int>(k) == labels[i] ? 1.0 : 0.0);
                    axpy(g, x, gw.row(k));
                    gb[k] += g;
                }
            }
            for (std::size_t k = 0; k < c; ++k) {
                auto w = probe.weight.row(k);
                auto vw = vel_w.row(k);
                auto gk = gw.row(k);
                for (std::size_t j = 0; j < d; ++j) {
                    vw[j] = cfg.momentum * vw[j] + gk[j] / bsz;
                    w[j] -= lr * vw[j];
                }
                vel_b[k] = cfg.momentum * vel_b[k] + gb[k] / bsz;
                probe.bias[k] -= lr * vel_b[k];
            }
        }
    }
    return probe;
}

// Mean softmax cross-entropy of the probe on a feature/label set.
inline double probe_loss(const LinearProbe& probe, const Matrix& features,
                         std::span<const int> labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < features.rows(); ++i) {
        auto logits = probe_logits(probe, features.row(i));
        double mx = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (double l : logits) denom += std::exp(l - mx);
        total += -(logits[static_cast<std::size_t>(labels[i])] - mx - std::log(denom));
    }
    return total / static_cast<double>(features.rows());
}

inline double probe_accuracy(const LinearProbe& probe, const Matrix& features,
                             std::span<const int> labels) {
    if (features.rows() != labels.size())
        throw ShapeMismatchError("probe_accuracy: feature/label counts disagree");
    if (features.cols() != probe.weight.cols())
        throw ShapeMismatchError("probe_accuracy: feature dimension mismatch");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < features.rows(); ++i)
        if (probe_predict(probe, features.row(i)) == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(features.rows());
}

// rows = true class, columns = predicted class.
inline Matrix confusion_matrix(const LinearProbe& probe, const Matrix& features,
                               std::span<const int> labels) {
    const std::size_t c = probe.weight.rows();
    Matrix m(c, c, 0.0);
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const int pred = probe_predict(probe, features.row(i));
        m(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(pred)) += 1.0;
    }
    return m;
}

inline void emit_confusion_csv(const Matrix& confusion, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_confusion_csv: cannot open " + path.string());
    out << "true_class";
    for (std::size_t c = 0; c < confusion.cols(); ++c) out << ",pred_" << c;
    out << '\n';
    for (std::size_t r = 0; r < confusion.rows(); ++r) {
        out << r;
        for (std::size_t c = 0; c < confusion.cols(); ++c)
            out << ',' << static_cast<long long>(confusion(r, c));
        out << '\n';
    }
    if (!out) throw IoError("emit_confusion_csv: write failed for " + path.string());
}

} // namespace ftcl
