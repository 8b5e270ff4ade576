#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftcl/checkpoint.hpp"
#include "ftcl/config.hpp"
#include "ftcl/data.hpp"
#include "ftcl/errors.hpp"
#include "ftcl/eval.hpp"
#include "ftcl/svg.hpp"
#include "ftcl/telemetry.hpp"
#include "ftcl/trainer.hpp"
#include "ftcl/version.hpp"

namespace ftcl {

inline Dataset load_dataset(const DataConfig& d) {
    Dataset ds;
    if (d.source == "idx") {
        ds = load_idx(d.idx_images, d.idx_labels);
    } else if (d.source == "csv") {
        ds = load_csv(d.csv_path, d.csv_label_column);
    } else {
        ds = synth_gaussian_mixture(d.synth_classes, d.synth_per_class, d.synth_dim,
                                    d.synth_separation, d.synth_seed);
    }
    if (d.limit > 0 && d.limit < ds.size()) {
        Dataset cut;
        cut.source = ds.source;
        cut.samples = Matrix(d.limit, ds.dim());
        for (std::size_t i = 0; i < d.limit; ++i) {
            auto src = ds.samples.row(i);
            std::copy(src.begin(), src.end(), cut.samples.row(i).begin());
        }
        if (ds.labels)
            cut.labels = std::vector<int>(ds.labels->begin(),
                                          ds.labels->begin() + static_cast<std::ptrdiff_t>(d.limit));
        ds = std::move(cut);
    }
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        if (!std::isfinite(ds.samples.data()[i]))
            throw DataError("dataset contains non-finite values");
    return ds;
}

// Optional held-out set for probe evaluation.
inline std::optional<Dataset> load_eval_dataset(const DataConfig& d) {
    if (!d.eval_idx_images.empty() && !d.eval_idx_labels.empty())
        return load_idx(d.eval_idx_images, d.eval_idx_labels);
    if (!d.eval_csv_path.empty()) return load_csv(d.eval_csv_path, d.csv_label_column);
    return std::nullopt;
}

struct PretrainOutcome {
    std::vector<double> loss_trace;
    double final_epoch_loss = 0.0;
    std::uint64_t steps = 0;
    std::filesystem::path checkpoint;
    std::filesystem::path scores_csv;
    std::filesystem::path grads_csv;
    std::filesystem::path manifest;
    std::filesystem::path resolved_config;
};

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

inline void write_manifest(const std::filesystem::path& path, const std::string& command,
                           const RunConfig& cfg, const std::vector<std::string>& outputs,
                           const nlohmann::json& metrics, const std::string& status) {
    nlohmann::json m;
    m["tool"] = "ftcl";
    m["version"] = kVersion;
    m["command"] = command;
    m["seed"] = cfg.train.seed;
    nlohmann::json jcfg = nlohmann::json::object();
    for (const auto& [k, v] : kv_from_run_config(cfg)) jcfg[k] = v;
    m["config"] = jcfg;
    m["outputs"] = outputs;
    m["metrics"] = metrics;
    m["status"] = status;
    write_text_file(path, m.dump(2) + "\n");
}

} // namespace detail

// Runs the training loop and writes checkpoint + telemetry CSVs + resolved
// config + manifest into out_dir. A non-finite loss aborts the run, records
// the aborting step in the manifest, and rethrows.
inline PretrainOutcome run_pretrain(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    const Dataset data = load_dataset(cfg.data);

    PretrainOutcome out;
    out.checkpoint = out_dir / "checkpoint.bin";
    out.scores_csv = out_dir / cfg.telemetry.scores_csv;
    out.grads_csv = out_dir / cfg.telemetry.grads_csv;
    out.manifest = out_dir / "manifest.json";
    out.resolved_config = out_dir / "config.resolved.cfg";

    detail::write_text_file(out.resolved_config, serialize_config(kv_from_run_config(cfg)));

    Trainer trainer(cfg, data);
    try {
        trainer.run();
    } catch (const NumericError& e) {
        nlohmann::json metrics;
        metrics["aborted_step"] = e.step;
        metrics["steps"] = trainer.loss_trace().size();
        detail::write_manifest(out.manifest, "pretrain", cfg,
                               {out.resolved_config.filename().string()}, metrics,
                               "aborted_numeric");
        throw;
    }

    const auto& trace = trainer.loss_trace();
    const std::size_t steps_per_epoch = data.size() / cfg.train.batch_size;
    double final_loss = 0.0;
    for (std::size_t i = trace.size() - steps_per_epoch; i < trace.size(); ++i)
        final_loss += trace[i];
    final_loss /= static_cast<double>(steps_per_epoch);

    Checkpoint ckpt;
    ckpt.params_q = trainer.params_q();
    ckpt.params_k = trainer.params_k();
    ckpt.velocity = trainer.optimizer().velocity;
    ckpt.opt_momentum = trainer.optimizer().momentum;
    ckpt.opt_weight_decay = trainer.optimizer().weight_decay;
    ckpt.schedule = trainer.optimizer().schedule;
    ckpt.seed = cfg.train.seed;
    ckpt.epochs_completed = cfg.train.epochs;
    ckpt.global_step = trainer.global_step();
    save_checkpoint(ckpt, out.checkpoint);

    std::vector<std::string> outputs{out.checkpoint.filename().string(),
                                     out.resolved_config.filename().string()};
    if (cfg.telemetry.enabled) {
        emit_scores_csv(trainer.telemetry().scores(), out.scores_csv);
        emit_grads_csv(trainer.telemetry().grad_epochs(), out.grads_csv);
        outputs.push_back(out.scores_csv.filename().string());
        outputs.push_back(out.grads_csv.filename().string());
    }

    nlohmann::json metrics;
    metrics["final_epoch_loss"] = final_loss;
    metrics["steps"] = trace.size();
    metrics["epochs"] = cfg.train.epochs;
    detail::write_manifest(out.manifest, "pretrain", cfg, outputs, metrics, "ok");

    out.loss_trace = trace;
    out.final_epoch_loss = final_loss;
    out.steps = trace.size();
    return out;
}

struct ProbeOutcome {
    double accuracy = 0.0;
    std::filesystem::path confusion_csv;
    std::filesystem::path manifest;
};

// Linear readout: freeze the checkpointed query encoder, fit a linear
// softmax classifier on probe-train features, report top-1 accuracy on the
// held-out set (explicit eval dataset if configured, else a deterministic
// split of the labeled dataset).
inline ProbeOutcome run_probe(const std::filesystem::path& checkpoint_path, const RunConfig& cfg,
                              const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);

    const Dataset data = load_dataset(cfg.data);
    if (!data.labels)
        throw DegenerateLabelsError("probe: dataset has no labels (data.csv_label_column unset?)");

    Matrix fit_features;
    std::vector<int> fit_labels;
    Matrix eval_features;
    std::vector<int> eval_labels;

    const auto eval_set = load_eval_dataset(cfg.data);
    if (eval_set) {
        if (!eval_set->labels)
            throw DegenerateLabelsError("probe: eval dataset has no labels");
        fit_features = extract_features(ckpt.params_q, data);
        fit_labels = *data.labels;
        eval_features = extract_features(ckpt.params_q, *eval_set);
        eval_labels = *eval_set->labels;
    } else {
        SeededRng split_rng = SeededRng(cfg.train.seed).stream(RngStream::probe, 0xe7a1);
        const auto order = random_permutation(data.size(), split_rng);
        const auto n_eval = static_cast<std::size_t>(
            cfg.probe_val_fraction * static_cast<double>(data.size()));
        if (n_eval == 0 || n_eval >= data.size())
            throw ConfigError("probe.val_fraction: split leaves an empty side");
        Matrix features = extract_features(ckpt.params_q, data);
        fit_features = Matrix(data.size() - n_eval, features.cols());
        eval_features = Matrix(n_eval, features.cols());
        for (std::size_t i = 0; i < order.size(); ++i) {
            auto src = features.row(order[i]);
            if (i < n_eval) {
                std::copy(src.begin(), src.end(), eval_features.row(i).begin());
                eval_labels.push_back((*data.labels)[order[i]]);
            } else {
                std::copy(src.begin(), src.end(), fit_features.row(i - n_eval).begin());
                fit_labels.push_back((*data.labels)[order[i]]);
            }
        }
    }

    SeededRng probe_rng = SeededRng(cfg.train.seed).stream(RngStream::probe);
    const LinearProbe probe = fit_linear_probe(fit_features, fit_labels, cfg.probe, probe_rng);

    ProbeOutcome out;
    out.accuracy = probe_accuracy(probe, eval_features, eval_labels);
    out.confusion_csv = out_dir / "confusion.csv";
    out.manifest = out_dir / "probe_manifest.json";
    emit_confusion_csv(confusion_matrix(probe, eval_features, eval_labels), out.confusion_csv);

    nlohmann::json metrics;
    metrics["top1_accuracy"] = out.accuracy;
    metrics["eval_samples"] = eval_labels.size();
    detail::write_manifest(out.manifest, "probe", cfg, {out.confusion_csv.filename().string()},
                           metrics, "ok");
    return out;
}

// Renders score/grad CSVs as SVG panels. Score panels overlay one series per
// input CSV (suffixed /pre and /post when a file carries dual-logged rows);
// the grads panel emits one SVG per input CSV with one series per layer.
inline std::vector<std::filesystem::path> run_plot(
    const std::vector<std::filesystem::path>& csvs, const std::string& panel,
    const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    if (panel == "mean_pos" || panel == "mean_neg" || panel == "var_neg") {
        std::vector<Series> series;
        for (const auto& csv : csvs) {
            const auto records = parse_scores_csv(csv);
            const std::string run_name = csv.parent_path().filename().string().empty()
                                             ? csv.stem().string()
                                             : csv.parent_path().filename().string();
            bool has_pre = false;
            for (const auto& r : records) has_pre |= r.pre_ft;
            for (int pre = 0; pre <= (has_pre ? 1 : 0); ++pre) {
                Series s;
                s.name = has_pre ? run_name + (pre ? "/pre" : "/post") : run_name;
                for (const auto& r : records) {
                    if (r.pre_ft != (pre == 1)) continue;
                    double y = r.mean_pos;
                    if (panel == "mean_neg") y = r.mean_neg;
                    if (panel == "var_neg") y = r.var_neg;
                    s.points.emplace_back(static_cast<double>(r.step), y);
                }
                if (!s.points.empty()) series.push_back(std::move(s));
            }
        }
        const auto path = out_dir / (panel + ".svg");
        emit_svg_plot(series, path, SvgStyle{1000, 600, panel, "step", panel});
        written.push_back(path);
    } else if (panel == "grads") {
        for (const auto& csv : csvs) {
            const auto records = parse_grads_csv(csv);
            std::vector<Series> series;
            for (const auto& r : records) {
                for (const auto& [layer, norm] : r.layer_norms) {
                    auto it = std::find_if(series.begin(), series.end(),
                                           [&](const Series& s) { return s.name == layer; });
                    if (it == series.end()) {
                        series.push_back(Series{layer, {}});
                        it = series.end() - 1;
                    }
                    it->points.emplace_back(static_cast<double>(r.epoch), norm);
                }
            }
            const std::string run_name = csv.parent_path().filename().string().empty()
                                             ? csv.stem().string()
                                             : csv.parent_path().filename().string();
            const auto path = out_dir / ("grads_" + run_name + ".svg");
            emit_svg_plot(series, path, SvgStyle{1000, 600, "gradient l2 norms: " + run_name,
                                                 "epoch", "l2 norm"});
            written.push_back(path);
        }
    } else {
        throw ConfigError("plot: unknown panel '" + panel +
                          "' (expected mean_pos, mean_neg, var_neg, or grads)");
    }
    return written;
}

struct SweepOutcome {
    std::vector<std::pair<std::string, std::filesystem::path>> cells; // name -> run dir
    std::filesystem::path summary;
};

// Cartesian grid over every `{a, b, c}` value in the config; one pretrain run
// (and manifest) per cell.
inline SweepOutcome run_sweep(const KvMap& base, const std::filesystem::path& out_dir) {
    const auto cells = expand_sweep_grid(base);
    SweepOutcome out;
    std::filesystem::create_directories(out_dir);
    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        char idx[16];
        std::snprintf(idx, sizeof(idx), "%03zu", i);
        std::string dir_name = std::string("cell_") + idx + "_" + cells[i].first;
        for (auto& ch : dir_name)
            if (ch == '/' || ch == ' ') ch = '_';
        const auto cell_dir = out_dir / dir_name;
        const RunConfig cfg = run_config_from_kv(cells[i].second);
        const PretrainOutcome res = run_pretrain(cfg, cell_dir);
        nlohmann::json cell;
        cell["name"] = cells[i].first;
        cell["dir"] = dir_name;
        cell["final_epoch_loss"] = res.final_epoch_loss;
        summary.push_back(cell);
        out.cells.emplace_back(cells[i].first, cell_dir);
    }
    out.summary = out_dir / "sweep.json";
    detail::write_text_file(out.summary, summary.dump(2) + "\n");
    return out;
}

} // namespace ftcl
