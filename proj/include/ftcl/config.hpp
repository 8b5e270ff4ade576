#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ftcl/errors.hpp"
#include "ftcl/run_config.hpp"

namespace ftcl {

// Resolved configuration as sorted dotted-key -> value text.
using KvMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double r = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size())
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return r;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const auto r = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return r;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : v) {
        if (c == ',') {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    cur = trim(cur);
    if (!cur.empty() || !parts.empty()) parts.push_back(cur);
    return parts;
}

inline std::string fmt_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

// Line-oriented `dotted.key = value` text with # comments.
inline KvMap parse_config_text(const std::string& text) {
    KvMap kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

inline KvMap load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

// Applies one `KEY=VALUE` command-line override.
inline void apply_override(KvMap& kv, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects KEY=VALUE, got '" + assignment + "'");
    kv[detail::trim(assignment.substr(0, eq))] = detail::trim(assignment.substr(eq + 1));
}

// Full resolved snapshot of a RunConfig (every key, documented defaults
// filled in). parse(serialize(cfg)) reproduces the run.
inline KvMap kv_from_run_config(const RunConfig& c) {
    KvMap kv;
    kv["train.seed"] = std::to_string(c.train.seed);
    kv["train.epochs"] = std::to_string(c.train.epochs);
    kv["train.batch_size"] = std::to_string(c.train.batch_size);
    kv["train.tau"] = detail::fmt_value(c.train.tau);
    kv["train.m"] = detail::fmt_value(c.train.momentum_m);
    kv["train.queue_size"] = std::to_string(c.train.queue_size);
    kv["train.mode"] = c.train.mode == TrainMode::momentum_queue ? "momentum_queue" : "in_batch";

    std::string hidden;
    for (std::size_t h : c.model.hidden_dims) {
        if (!hidden.empty()) hidden += ',';
        hidden += std::to_string(h);
    }
    kv["model.hidden_dims"] = hidden;
    kv["model.feature_dim"] = std::to_string(c.model.feature_dim);

    kv["opt.lr"] = detail::fmt_value(c.opt.lr);
    kv["opt.momentum"] = detail::fmt_value(c.opt.momentum);
    kv["opt.weight_decay"] = detail::fmt_value(c.opt.weight_decay);
    kv["opt.decay_factor"] = detail::fmt_value(c.opt.decay_factor);
    std::string decay_at;
    for (double m : c.opt.decay_at) {
        if (!decay_at.empty()) decay_at += ',';
        decay_at += detail::fmt_value(m);
    }
    kv["opt.decay_at"] = decay_at;

    auto pos_mode = [&] {
        switch (c.train.ft.pos_mode) {
            case PosFtMode::none: return "none";
            case PosFtMode::extrapolate: return "extrapolate";
            case PosFtMode::interpolate: return "interpolate";
        }
        return "none";
    }();
    auto neg_mode = [&] {
        switch (c.train.ft.neg_mode) {
            case NegFtMode::none: return "none";
            case NegFtMode::interpolate: return "interpolate";
            case NegFtMode::extrapolate: return "extrapolate";
            case NegFtMode::extend: return "extend";
        }
        return "none";
    }();
    kv["ft.pos_mode"] = pos_mode;
    kv["ft.alpha_ex"] = detail::fmt_value(c.train.ft.alpha_ex);
    kv["ft.neg_mode"] = neg_mode;
    kv["ft.alpha_in"] = detail::fmt_value(c.train.ft.alpha_in);
    kv["ft.hard_negatives"] = c.train.ft.hard.enabled ? "true" : "false";
    kv["ft.hard_alpha"] = detail::fmt_value(c.train.ft.hard.alpha);
    kv["ft.hard_beta"] = detail::fmt_value(c.train.ft.hard.beta);
    kv["ft.dimension_level"] = c.train.ft.dimension_level ? "true" : "false";
    kv["ft.renormalize"] = c.train.ft.renormalize ? "true" : "false";
    kv["ft.begin_epoch"] = std::to_string(c.train.ft.begin_epoch);
    kv["ft.per_entry_lambda"] = c.train.ft.per_entry_lambda ? "true" : "false";

    kv["data.source"] = c.data.source;
    kv["data.idx_images"] = c.data.idx_images;
    kv["data.idx_labels"] = c.data.idx_labels;
    kv["data.csv_path"] = c.data.csv_path;
    kv["data.csv_label_column"] =
        c.data.csv_label_column ? std::to_string(*c.data.csv_label_column) : "";
    kv["data.limit"] = std::to_string(c.data.limit);
    kv["data.synth_classes"] = std::to_string(c.data.synth_classes);
    kv["data.synth_per_class"] = std::to_string(c.data.synth_per_class);
    kv["data.synth_dim"] = std::to_string(c.data.synth_dim);
    kv["data.synth_separation"] = detail::fmt_value(c.data.synth_separation);
    kv["data.synth_seed"] = std::to_string(c.data.synth_seed);
    kv["data.eval_idx_images"] = c.data.eval_idx_images;
    kv["data.eval_idx_labels"] = c.data.eval_idx_labels;
    kv["data.eval_csv_path"] = c.data.eval_csv_path;

    auto aug_kind = [&] {
        switch (c.aug.kind) {
            case AugKind::none: return "none";
            case AugKind::image: return "image";
            case AugKind::vector: return "vector";
        }
        return "none";
    }();
    kv["aug.policy"] = aug_kind;
    kv["aug.shift"] = detail::fmt_value(c.aug.shift);
    kv["aug.noise"] = detail::fmt_value(c.aug.noise);
    kv["aug.erase_prob"] = detail::fmt_value(c.aug.erase_prob);
    kv["aug.erase_size"] = std::to_string(c.aug.erase_size);
    kv["aug.flip"] = c.aug.flip ? "true" : "false";
    kv["aug.dropout"] = detail::fmt_value(c.aug.dropout);

    kv["telemetry.enabled"] = c.telemetry.enabled ? "true" : "false";
    kv["telemetry.log_pre_ft"] = c.telemetry.log_pre_ft ? "true" : "false";
    kv["telemetry.sample_n"] = std::to_string(c.telemetry.sample_n);
    kv["telemetry.scores_csv"] = c.telemetry.scores_csv;
    kv["telemetry.grads_csv"] = c.telemetry.grads_csv;

    kv["probe.lr"] = detail::fmt_value(c.probe.lr);
    kv["probe.epochs"] = std::to_string(c.probe.epochs);
    kv["probe.batch_size"] = std::to_string(c.probe.batch_size);
    kv["probe.momentum"] = detail::fmt_value(c.probe.momentum);
    kv["probe.decay_factor"] = detail::fmt_value(c.probe.decay_factor);
    std::string probe_decay;
    for (double m : c.probe.decay_at) {
        if (!probe_decay.empty()) probe_decay += ',';
        probe_decay += detail::fmt_value(m);
    }
    kv["probe.decay_at"] = probe_decay;
    kv["probe.val_fraction"] = detail::fmt_value(c.probe_val_fraction);
    return kv;
}

// Typed conversion with key-path diagnostics; unknown keys are errors.
inline RunConfig run_config_from_kv(const KvMap& kv) {
    RunConfig c;
    for (const auto& [key, value] : kv) {
        if (key == "train.seed") c.train.seed = detail::parse_u64(key, value);
        else if (key == "train.epochs") c.train.epochs = detail::parse_u64(key, value);
        else if (key == "train.batch_size") c.train.batch_size = detail::parse_u64(key, value);
        else if (key == "train.tau") c.train.tau = detail::parse_double(key, value);
        else if (key == "train.m") c.train.momentum_m = detail::parse_double(key, value);
        else if (key == "train.queue_size") c.train.queue_size = detail::parse_u64(key, value);
        else if (key == "train.mode") {
            if (value == "momentum_queue") c.train.mode = TrainMode::momentum_queue;
            else if (value == "in_batch") c.train.mode = TrainMode::in_batch;
            else throw ConfigError("train.mode: expected momentum_queue or in_batch");
        } else if (key == "model.hidden_dims") {
            c.model.hidden_dims.clear();
            for (const auto& p : detail::split_list(value))
                c.model.hidden_dims.push_back(detail::parse_u64(key, p));
        } else if (key == "model.feature_dim") {
            c.model.feature_dim = detail::parse_u64(key, value);
        } else if (key == "opt.lr") c.opt.lr = detail::parse_double(key, value);
        else if (key == "opt.momentum") c.opt.momentum = detail::parse_double(key, value);
        else if (key == "opt.weight_decay") c.opt.weight_decay = detail::parse_double(key, value);
        else if (key == "opt.decay_factor") c.opt.decay_factor = detail::parse_double(key, value);
        else if (key == "opt.decay_at") {
            c.opt.decay_at.clear();
            for (const auto& p : detail::split_list(value))
                c.opt.decay_at.push_back(detail::parse_double(key, p));
        } else if (key == "ft.pos_mode") {
            if (value == "none") c.train.ft.pos_mode = PosFtMode::none;
            else if (value == "extrapolate") c.train.ft.pos_mode = PosFtMode::extrapolate;
            else if (value == "interpolate") c.train.ft.pos_mode = PosFtMode::interpolate;
            else throw ConfigError("ft.pos_mode: expected none, extrapolate, or interpolate");
        } else if (key == "ft.alpha_ex") c.train.ft.alpha_ex = detail::parse_double(key, value);
        else if (key == "ft.neg_mode") {
            if (value == "none") c.train.ft.neg_mode = NegFtMode::none;
            else if (value == "interpolate") c.train.ft.neg_mode = NegFtMode::interpolate;
            else if (value == "extrapolate") c.train.ft.neg_mode = NegFtMode::extrapolate;
            else if (value == "extend") c.train.ft.neg_mode = NegFtMode::extend;
            else
                throw ConfigError(
                    "ft.neg_mode: expected none, interpolate, extrapolate, or extend");
        } else if (key == "ft.alpha_in") c.train.ft.alpha_in = detail::parse_double(key, value);
        else if (key == "ft.hard_negatives") c.train.ft.hard.enabled = detail::parse_bool(key, value);
        else if (key == "ft.hard_alpha") c.train.ft.hard.alpha = detail::parse_double(key, value);
        else if (key == "ft.hard_beta") c.train.ft.hard.beta = detail::parse_double(key, value);
        else if (key == "ft.dimension_level")
            c.train.ft.dimension_level = detail::parse_bool(key, value);
        else if (key == "ft.renormalize") c.train.ft.renormalize = detail::parse_bool(key, value);
        else if (key == "ft.begin_epoch") c.train.ft.begin_epoch = detail::parse_u64(key, value);
        else if (key == "ft.per_entry_lambda")
            c.train.ft.per_entry_lambda = detail::parse_bool(key, value);
        else if (key == "data.source") c.data.source = value;
        else if (key == "data.idx_images") c.data.idx_images = value;
        else if (key == "data.idx_labels") c.data.idx_labels = value;
        else if (key == "data.csv_path") c.data.csv_path = value;
        else if (key == "data.csv_label_column") {
            if (value.empty()) c.data.csv_label_column.reset();
            else c.data.csv_label_column = detail::parse_u64(key, value);
        } else if (key == "data.limit") c.data.limit = detail::parse_u64(key, value);
        else if (key == "data.synth_classes") c.data.synth_classes = detail::parse_u64(key, value);
        else if (key == "data.synth_per_class")
            c.data.synth_per_class = detail::parse_u64(key, value);
        else if (key == "data.synth_dim") c.data.synth_dim = detail::parse_u64(key, value);
        else if (key == "data.synth_separation")
            c.data.synth_separation = detail::parse_double(key, value);
        else if (key == "data.synth_seed") c.data.synth_seed = detail::parse_u64(key, value);
        else if (key == "data.eval_idx_images") c.data.eval_idx_images = value;
        else if (key == "data.eval_idx_labels") c.data.eval_idx_labels = value;
        else if (key == "data.eval_csv_path") c.data.eval_csv_path = value;
        else if (key == "aug.policy") {
            if (value == "none") c.aug.kind = AugKind::none;
            else if (value == "image") c.aug.kind = AugKind::image;
            else if (value == "vector") c.aug.kind = AugKind::vector;
            else throw ConfigError("aug.policy: expected none, image, or vector");
        } else if (key == "aug.shift") c.aug.shift = detail::parse_double(key, value);
        else if (key == "aug.noise") c.aug.noise = detail::parse_double(key, value);
        else if (key == "aug.erase_prob") c.aug.erase_prob = detail::parse_double(key, value);
        else if (key == "aug.erase_size") c.aug.erase_size = detail::parse_u64(key, value);
        else if (key == "aug.flip") c.aug.flip = detail::parse_bool(key, value);
        else if (key == "aug.dropout") c.aug.dropout = detail::parse_double(key, value);
        else if (key == "telemetry.enabled") c.telemetry.enabled = detail::parse_bool(key, value);
        else if (key == "telemetry.log_pre_ft")
            c.telemetry.log_pre_ft = detail::parse_bool(key, value);
        else if (key == "telemetry.sample_n") c.telemetry.sample_n = detail::parse_u64(key, value);
        else if (key == "telemetry.scores_csv") c.telemetry.scores_csv = value;
        else if (key == "telemetry.grads_csv") c.telemetry.grads_csv = value;
        else if (key == "probe.lr") c.probe.lr = detail::parse_double(key, value);
        else if (key == "probe.epochs") c.probe.epochs = detail::parse_u64(key, value);
        else if (key == "probe.batch_size") c.probe.batch_size = detail::parse_u64(key, value);
        else if (key == "probe.momentum") c.probe.momentum = detail::parse_double(key, value);
        else if (key == "probe.decay_factor")
            c.probe.decay_factor = detail::parse_double(key, value);
        else if (key == "probe.decay_at") {
            c.probe.decay_at.clear();
            for (const auto& p : detail::split_list(value))
                c.probe.decay_at.push_back(detail::parse_double(key, p));
        } else if (key == "probe.val_fraction")
            c.probe_val_fraction = detail::parse_double(key, value);
        else
            throw ConfigError("unknown config key: " + key);
    }
    c.validate();
    return c;
}

inline std::string serialize_config(const KvMap& kv) {
    std::string out;
    for (const auto& [key, value] : kv) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    }
    return out;
}

// Sweep grids: any value of the form {a, b, c} expands into one run per
// combination (cartesian product over all braced keys, in key order).
inline std::vector<std::pair<std::string, KvMap>> expand_sweep_grid(const KvMap& base) {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    KvMap fixed;
    for (const auto& [key, value] : base) {
        if (value.size() >= 2 && value.front() == '{' && value.back() == '}') {
            auto options = detail::split_list(value.substr(1, value.size() - 2));
            if (options.empty())
                throw ConfigError(key + ": empty sweep list");
            axes.emplace_back(key, std::move(options));
        } else {
            fixed[key] = value;
        }
    }
    std::vector<std::pair<std::string, KvMap>> cells;
    std::vector<std::size_t> cursor(axes.size(), 0);
    for (;;) {
        KvMap cell = fixed;
        std::string name;
        for (std::size_t i = 0; i < axes.size(); ++i) {
            cell[axes[i].first] = axes[i].second[cursor[i]];
            if (!name.empty()) name += "_";
            name += axes[i].first + "=" + axes[i].second[cursor[i]];
        }
        if (name.empty()) name = "cell";
        cells.emplace_back(name, std::move(cell));
        std::size_t i = axes.size();
        for (; i-- > 0;) {
            if (++cursor[i] < axes[i].second.size()) break;
            cursor[i] = 0;
        }
        if (i == static_cast<std::size_t>(-1)) break;
        if (axes.empty()) break;
    }
    return cells;
}

} // namespace ftcl
