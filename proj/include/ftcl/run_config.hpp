#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ftcl/data.hpp"
#include "ftcl/encoder.hpp"
#include "ftcl/errors.hpp"
#include "ftcl/eval.hpp"
#include "ftcl/feature_transform.hpp"

namespace ftcl {

enum class TrainMode { momentum_queue, in_batch };

// Core training knobs (Eq. 1 temperature, Eq. 2 momentum, queue size, mode).
struct TrainConfig {
    double tau = 0.07;
    double momentum_m = 0.99;
    std::size_t queue_size = 4096;
    std::size_t batch_size = 256;
    std::size_t epochs = 10;
    TrainMode mode = TrainMode::momentum_queue;
    FtConfig ft;
    std::uint64_t seed = 42;

    void validate() const {
        if (tau <= 0.0) throw ConfigError("train.tau: must be > 0");
        if (momentum_m < 0.0 || momentum_m > 1.0)
            throw ConfigError("train.m: must lie in [0, 1]");
        if (mode == TrainMode::momentum_queue && queue_size < 1)
            throw ConfigError("train.queue_size: must be >= 1 in momentum_queue mode");
        if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
        if (mode == TrainMode::in_batch && batch_size < 2)
            throw ConfigError("train.batch_size: in_batch mode needs at least 2");
        if (epochs < 1) throw ConfigError("train.epochs: must be >= 1");
        ft.validate();
        if (ft.any_enabled() && ft.begin_epoch >= epochs)
            throw ConfigError("ft.begin_epoch: must be below train.epochs");
        if (mode == TrainMode::in_batch && ft.hard.enabled)
            throw ConfigError("ft.hard_negatives: only available in momentum_queue mode");
    }
};

struct ModelConfig {
    std::vector<std::size_t> hidden_dims{512, 256};
    std::size_t feature_dim = 64;

    void validate() const {
        if (feature_dim < 1) throw ConfigError("model.feature_dim: must be >= 1");
        for (std::size_t h : hidden_dims)
            if (h < 1) throw ConfigError("model.hidden_dims: entries must be >= 1");
    }
};

struct OptConfig {
    double lr = 0.03;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double decay_factor = 0.1;
    std::vector<double> decay_at{0.6, 0.8};

    void validate() const {
        if (lr <= 0.0) throw ConfigError("opt.lr: must be > 0");
        if (momentum < 0.0 || momentum >= 1.0)
            throw ConfigError("opt.momentum: must lie in [0, 1)");
        if (weight_decay < 0.0) throw ConfigError("opt.weight_decay: must be >= 0");
        for (double m : decay_at)
            if (m < 0.0 || m > 1.0)
                throw ConfigError("opt.decay_at: milestones are epoch fractions in [0, 1]");
    }

    LrSchedule schedule() const { return LrSchedule{lr, decay_factor, decay_at}; }
};

struct DataConfig {
    std::string source = "synthetic"; // synthetic | idx | csv
    std::string idx_images;
    std::string idx_labels;
    std::string csv_path;
    std::optional<std::size_t> csv_label_column;
    std::size_t limit = 0; // 0 = use everything
    // synthetic
    std::size_t synth_classes = 10;
    std::size_t synth_per_class = 500;
    std::size_t synth_dim = 64;
    double synth_separation = 3.0;
    std::uint64_t synth_seed = 7;
    // optional held-out set for probe evaluation
    std::string eval_idx_images;
    std::string eval_idx_labels;
    std::string eval_csv_path;

    void validate() const {
        if (source != "synthetic" && source != "idx" && source != "csv")
            throw ConfigError("data.source: must be synthetic, idx, or csv");
        if (source == "idx" && (idx_images.empty() || idx_labels.empty()))
            throw ConfigError("data.idx_images/data.idx_labels: required for idx source");
        if (source == "csv" && csv_path.empty())
            throw ConfigError("data.csv_path: required for csv source");
        if (source == "synthetic" && (synth_classes < 1 || synth_per_class < 1 || synth_dim < 1))
            throw ConfigError("data.synth_*: classes, per_class and dim must be >= 1");
    }
};

struct TelemetryConfig {
    bool enabled = true;
    bool log_pre_ft = false;
    std::size_t sample_n = 64;
    std::string scores_csv = "scores.csv";
    std::string grads_csv = "grads.csv";

    void validate() const {
        if (sample_n < 1) throw ConfigError("telemetry.sample_n: must be >= 1");
    }
};

// Everything one run needs; parsed from the config file plus overrides.
struct RunConfig {
    TrainConfig train;
    ModelConfig model;
    OptConfig opt;
    DataConfig data;
    AugPolicy aug;
    TelemetryConfig telemetry;
    ProbeConfig probe;
    double probe_val_fraction = 0.2;

    void validate() const {
        train.validate();
        model.validate();
        opt.validate();
        data.validate();
        telemetry.validate();
        if (aug.shift < 0.0 || aug.noise < 0.0 || aug.erase_prob < 0.0 || aug.erase_prob > 1.0 ||
            aug.dropout < 0.0 || aug.dropout > 1.0)
            throw ConfigError("aug: strengths must be non-negative (probabilities in [0, 1])");
        if (probe.lr <= 0.0) throw ConfigError("probe.lr: must be > 0");
        if (probe.epochs < 1) throw ConfigError("probe.epochs: must be >= 1");
        if (probe_val_fraction <= 0.0 || probe_val_fraction >= 1.0)
            throw ConfigError("probe.val_fraction: must lie in (0, 1)");
    }
};

} // namespace ftcl
