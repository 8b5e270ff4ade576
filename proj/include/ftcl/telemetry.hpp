#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ftcl/encoder.hpp"
#include "ftcl/errors.hpp"
#include "ftcl/matrix.hpp"

namespace ftcl {

// Per-step pair-score statistics over an n-query subsample: the batch mean of
// positive scores, and the mean over queries of each query's K-negative mean
// and population variance.
struct ScoreStatsRecord {
    std::size_t step = 0;
    std::size_t epoch = 0;
    double mean_pos = 0.0;
    double mean_neg = 0.0;
    double var_neg = 0.0;
    std::size_t n = 0;
    std::size_t k = 0;
    bool pre_ft = false;

    bool operator==(const ScoreStatsRecord&) const = default;
};

// pos: n positive scores; neg: n x K negative scores. var_neg uses the
// population variance (divide by K).
inline ScoreStatsRecord record_score_stats(std::span<const double> pos, const Matrix& neg,
                                           std::size_t step = 0, std::size_t epoch = 0,
                                           bool pre_ft = false) {
    if (pos.empty() || neg.rows() != pos.size() || neg.cols() == 0)
        throw EmptyInputError("record_score_stats: need n > 0 queries and K > 0 negatives");
    ScoreStatsRecord r;
    r.step = step;
    r.epoch = epoch;
    r.n = pos.size();
    r.k = neg.cols();
    r.pre_ft = pre_ft;
    double sum_pos = 0.0;
    for (double p : pos) sum_pos += p;
    r.mean_pos = sum_pos / static_cast<double>(pos.size());

    const double inv_k = 1.0 / static_cast<double>(neg.cols());
    double sum_means = 0.0;
    double sum_vars = 0.0;
    for (std::size_t i = 0; i < neg.rows(); ++i) {
        auto row = neg.row(i);
        double m = 0.0;
        for (double v : row) m += v;
        m *= inv_k;
        double var = 0.0;
        for (double v : row) var += (v - m) * (v - m);
        var *= inv_k;
        sum_means += m;
        sum_vars += var;
    }
    r.mean_neg = sum_means / static_cast<double>(neg.rows());
    r.var_neg = sum_vars / static_cast<double>(neg.rows());
    return r;
}

// Per-layer gradient L2 norms, weights and biases listed separately.
struct GradStatsRecord {
    std::size_t epoch = 0;
    std::vector<std::pair<std::string, double>> layer_norms;
};

inline GradStatsRecord record_grad_landscape(const GradientSet& grads, std::size_t epoch) {
    GradStatsRecord r;
    r.epoch = epoch;
    for (std::size_t l = 0; l < grads.layers.size(); ++l) {
        const auto& g = grads.layers[l];
        double sw = 0.0;
        for (std::size_t i = 0; i < g.weight.size(); ++i) sw += g.weight.data()[i] * g.weight.data()[i];
        double sb = 0.0;
        for (double b : g.bias) sb += b * b;
        r.layer_norms.emplace_back("layer" + std::to_string(l) + ".weight", std::sqrt(sw));
        r.layer_norms.emplace_back("layer" + std::to_string(l) + ".bias", std::sqrt(sb));
    }
    return r;
}

namespace detail {

// %.17g round-trips doubles exactly and is byte-stable across runs.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline void emit_scores_csv(std::span<const ScoreStatsRecord> records,
                            const std::filesystem::path& path) {
    if (records.empty()) throw EmptyInputError("emit_scores_csv: no records");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_scores_csv: cannot open " + path.string());
    out << "step,epoch,mean_pos,mean_neg,var_neg,n,K,pre_ft\n";
    for (const auto& r : records) {
        out << r.step << ',' << r.epoch << ',' << detail::fmt_double(r.mean_pos) << ','
            << detail::fmt_double(r.mean_neg) << ',' << detail::fmt_double(r.var_neg) << ','
            << r.n << ',' << r.k << ',' << (r.pre_ft ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("emit_scores_csv: write failed for " + path.string());
}

inline std::vector<ScoreStatsRecord> parse_scores_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("parse_scores_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("step,epoch,mean_pos", 0) != 0)
        throw ParseError("parse_scores_csv: missing header in " + path.string());
    std::vector<ScoreStatsRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ScoreStatsRecord r;
        int pre = 0;
        unsigned long long step = 0, epoch = 0, n = 0, k = 0;
        if (std::sscanf(line.c_str(), "%llu,%llu,%lf,%lf,%lf,%llu,%llu,%d", &step, &epoch,
                        &r.mean_pos, &r.mean_neg, &r.var_neg, &n, &k, &pre) != 8)
            throw ParseError("parse_scores_csv: malformed row: " + line);
        r.step = step;
        r.epoch = epoch;
        r.n = n;
        r.k = k;
        r.pre_ft = pre != 0;
        records.push_back(r);
    }
    if (records.empty()) throw ParseError("parse_scores_csv: no data rows in " + path.string());
    return records;
}

inline void emit_grads_csv(std::span<const GradStatsRecord> records,
                           const std::filesystem::path& path) {
    if (records.empty()) throw EmptyInputError("emit_grads_csv: no records");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_grads_csv: cannot open " + path.string());
    out << "epoch,layer,l2_norm\n";
    for (const auto& r : records)
        for (const auto& [name, norm] : r.layer_norms)
            out << r.epoch << ',' << name << ',' << detail::fmt_double(norm) << '\n';
    if (!out) throw IoError("emit_grads_csv: write failed for " + path.string());
}

inline std::vector<GradStatsRecord> parse_grads_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("parse_grads_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("epoch,layer,l2_norm", 0) != 0)
        throw ParseError("parse_grads_csv: missing header in " + path.string());
    std::vector<GradStatsRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string epoch_s, layer, norm_s;
        if (!std::getline(ss, epoch_s, ',') || !std::getline(ss, layer, ',') ||
            !std::getline(ss, norm_s))
            throw ParseError("parse_grads_csv: malformed row: " + line);
        std::size_t epoch = 0;
        double norm = 0.0;
        try {
            epoch = std::stoull(epoch_s);
            norm = std::stod(norm_s);
        } catch (const std::exception&) {
            throw ParseError("parse_grads_csv: malformed row: " + line);
        }
        if (records.empty() || records.back().epoch != epoch) {
            records.push_back(GradStatsRecord{epoch, {}});
        }
        records.back().layer_norms.emplace_back(layer, norm);
    }
    if (records.empty()) throw ParseError("parse_grads_csv: no data rows in " + path.string());
    return records;
}

// Collects records during training. Grad norms are accumulated per step and
// folded into one mean record per epoch. Recording never touches training
// state; the loss trace is bitwise identical with telemetry on or off.
class TelemetryLog {
public:
    void add_scores(ScoreStatsRecord r) { scores_.push_back(r); }

    void add_step_grads(const GradientSet& grads, std::size_t epoch) {
        GradStatsRecord step = record_grad_landscape(grads, epoch);
        if (!accum_ || accum_epoch_ != epoch) {
            flush_epoch();
            accum_ = std::move(step);
            accum_epoch_ = epoch;
            accum_count_ = 1;
            return;
        }
        for (std::size_t i = 0; i < accum_->layer_norms.size(); ++i)
            accum_->layer_norms[i].second += step.layer_norms[i].second;
        ++accum_count_;
    }

    // Finalizes the pending epoch mean; call once after the last step.
    void finish() { flush_epoch(); }

    const std::vector<ScoreStatsRecord>& scores() const { return scores_; }
    const std::vector<GradStatsRecord>& grad_epochs() const { return grads_; }

private:
    void flush_epoch() {
        if (!accum_) return;
        for (auto& [name, sum] : accum_->layer_norms)
            sum /= static_cast<double>(accum_count_);
        grads_.push_back(std::move(*accum_));
        accum_.reset();
        accum_count_ = 0;
    }

    std::vector<ScoreStatsRecord> scores_;
    std::vector<GradStatsRecord> grads_;
    std::optional<GradStatsRecord> accum_;
    std::size_t accum_epoch_ = 0;
    std::size_t accum_count_ = 0;
};

} // namespace ftcl
