// ftcl command line: pretrain / probe / plot / sweep.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 numeric failure (non-finite loss).

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ftcl/config.hpp"
#include "ftcl/errors.hpp"
#include "ftcl/runner.hpp"
#include "ftcl/version.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "ftcl_out";
    std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Config file (dotted.key = value lines)");
    cmd->add_option("--set", args.overrides, "Override KEY=VALUE (repeatable)")
        ->type_name("KEY=VALUE");
    cmd->add_option("--out", args.out_dir, "Output directory");
    cmd->add_option("--seed", args.seed, "Override train.seed");
}

ftcl::KvMap resolve_kv(const CommonArgs& args) {
    ftcl::KvMap kv;
    if (!args.config_path.empty()) kv = ftcl::load_config_file(args.config_path);
    for (const auto& o : args.overrides) ftcl::apply_override(kv, o);
    if (args.seed >= 0) kv["train.seed"] = std::to_string(args.seed);
    return kv;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"feature-transformed contrastive learning engine"};
    app.set_version_flag("--version", std::string(ftcl::kVersion));
    app.require_subcommand(1);

    CommonArgs pretrain_args;
    auto* pretrain = app.add_subcommand("pretrain", "Run the contrastive training loop");
    add_common(pretrain, pretrain_args);

    CommonArgs probe_args;
    std::string checkpoint_path;
    auto* probe = app.add_subcommand("probe", "Linear readout of a checkpointed encoder");
    probe->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    add_common(probe, probe_args);

    CommonArgs plot_args;
    std::vector<std::string> plot_csvs;
    std::string panel = "mean_pos";
    auto* plot = app.add_subcommand("plot", "Render telemetry CSVs as SVG charts");
    plot->add_option("--csv", plot_csvs, "Input CSV (repeatable, overlaid)")->required();
    plot->add_option("--panel", panel, "mean_pos | mean_neg | var_neg | grads");
    plot->add_option("--out", plot_args.out_dir, "Output directory");

    CommonArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep",
                                     "Cartesian grid over {a, b, c} values in the config");
    add_common(sweep, sweep_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (pretrain->parsed()) {
            const auto cfg = ftcl::run_config_from_kv(resolve_kv(pretrain_args));
            const auto out = ftcl::run_pretrain(cfg, pretrain_args.out_dir);
            std::printf("pretrain: %llu steps, final epoch loss %.6f\n",
                        static_cast<unsigned long long>(out.steps), out.final_epoch_loss);
            std::printf("checkpoint: %s\n", out.checkpoint.string().c_str());
            std::printf("manifest: %s\n", out.manifest.string().c_str());
        } else if (probe->parsed()) {
            const auto cfg = ftcl::run_config_from_kv(resolve_kv(probe_args));
            const auto out = ftcl::run_probe(checkpoint_path, cfg, probe_args.out_dir);
            std::printf("top-1 accuracy: %.4f\n", out.accuracy);
            std::printf("confusion: %s\n", out.confusion_csv.string().c_str());
        } else if (plot->parsed()) {
            std::vector<std::filesystem::path> paths(plot_csvs.begin(), plot_csvs.end());
            const auto files = ftcl::run_plot(paths, panel, plot_args.out_dir);
            for (const auto& f : files) std::printf("wrote %s\n", f.string().c_str());
        } else if (sweep->parsed()) {
            const auto kv = resolve_kv(sweep_args);
            const auto out = ftcl::run_sweep(kv, sweep_args.out_dir);
            std::printf("sweep: %zu cells\n", out.cells.size());
            for (const auto& [name, dir] : out.cells)
                std::printf("  %s -> %s\n", name.c_str(), dir.string().c_str());
        }
    } catch (const ftcl::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ftcl::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const ftcl::NumericError& e) {
        std::fprintf(stderr, "numeric failure at step %zu: %s\n", e.step, e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
