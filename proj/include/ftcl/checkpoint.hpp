#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ftcl/encoder.hpp"
#include "ftcl/errors.hpp"

namespace ftcl {

// Everything needed to resume or evaluate a run: both encoders, optimizer
// state, and the RNG position (seed + completed epochs/steps). The byte
// layout is versioned by the magic header and round-trips losslessly (raw
// IEEE-754 doubles, host endianness).
struct Checkpoint {
    EncoderParams params_q;
    EncoderParams params_k;
    GradientSet velocity;
    double opt_momentum = 0.9;
    double opt_weight_decay = 1e-4;
    LrSchedule schedule;
    std::uint64_t seed = 0;
    std::uint64_t epochs_completed = 0;
    std::uint64_t global_step = 0;
};

namespace detail {

inline constexpr char kCkptMagic[8] = {'F', 'T', 'C', 'L', 'C', 'K', 'P', '1'};

inline void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw TruncatedError("checkpoint: truncated");
    return v;
}

inline double read_f64(std::istream& in) {
    double v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw TruncatedError("checkpoint: truncated");
    return v;
}

inline void write_layers(std::ostream& out, const std::vector<LayerParams>& layers) {
    for (const auto& l : layers) {
        out.write(reinterpret_cast<const char*>(l.weight.data()),
                  static_cast<std::streamsize>(l.weight.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(l.bias.data()),
                  static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
    }
}

inline void read_layers(std::istream& in, std::vector<LayerParams>& layers) {
    for (auto& l : layers) {
        if (!in.read(reinterpret_cast<char*>(l.weight.data()),
                     static_cast<std::streamsize>(l.weight.size() * sizeof(double))))
            throw TruncatedError("checkpoint: truncated parameters");
        if (!in.read(reinterpret_cast<char*>(l.bias.data()),
                     static_cast<std::streamsize>(l.bias.size() * sizeof(double))))
            throw TruncatedError("checkpoint: truncated parameters");
    }
}

inline std::vector<LayerParams> layers_for_arch(const EncoderArch& arch) {
    std::vector<LayerParams> layers(arch.layer_count());
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        layers[l].weight = Matrix(arch.out_dim(l), arch.in_dim(l));
        layers[l].bias.assign(arch.out_dim(l), 0.0);
    }
    return layers;
}

} // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path.string());
    out.write(detail::kCkptMagic, sizeof(detail::kCkptMagic));

    const EncoderArch& arch = ckpt.params_q.arch;
    detail::write_u64(out, arch.input_dim);
    detail::write_u64(out, arch.hidden_dims.size());
    for (std::size_t h : arch.hidden_dims) detail::write_u64(out, h);
    detail::write_u64(out, arch.feature_dim);

    detail::write_layers(out, ckpt.params_q.layers);
    detail::write_layers(out, ckpt.params_k.layers);
    detail::write_layers(out, ckpt.velocity.layers);

    detail::write_f64(out, ckpt.opt_momentum);
    detail::write_f64(out, ckpt.opt_weight_decay);
    detail::write_f64(out, ckpt.schedule.base_lr);
    detail::write_f64(out, ckpt.schedule.decay_factor);
    detail::write_u64(out, ckpt.schedule.milestones.size());
    for (double m : ckpt.schedule.milestones) detail::write_f64(out, m);

    detail::write_u64(out, ckpt.seed);
    detail::write_u64(out, ckpt.epochs_completed);
    detail::write_u64(out, ckpt.global_step);
    if (!out) throw IoError("save_checkpoint: write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) ||
        std::memcmp(magic, detail::kCkptMagic, sizeof(magic)) != 0)
        throw CheckpointVersionMismatchError("load_checkpoint: bad magic header");

    Checkpoint ckpt;
    EncoderArch arch;
    arch.input_dim = detail::read_u64(in);
    arch.hidden_dims.resize(detail::read_u64(in));
    for (auto& h : arch.hidden_dims) h = detail::read_u64(in);
    arch.feature_dim = detail::read_u64(in);

    ckpt.params_q.arch = arch;
    ckpt.params_q.layers = detail::layers_for_arch(arch);
    ckpt.params_k.arch = arch;
    ckpt.params_k.layers = detail::layers_for_arch(arch);
    ckpt.velocity.layers = detail::layers_for_arch(arch);
    detail::read_layers(in, ckpt.params_q.layers);
    detail::read_layers(in, ckpt.params_k.layers);
    detail::read_layers(in, ckpt.velocity.layers);

    ckpt.opt_momentum = detail::read_f64(in);
    ckpt.opt_weight_decay = detail::read_f64(in);
    ckpt.schedule.base_lr = detail::read_f64(in);
    ckpt.schedule.decay_factor = detail::read_f64(in);
    ckpt.schedule.milestones.resize(detail::read_u64(in));
    for (auto& m : ckpt.schedule.milestones) m = detail::read_f64(in);

    ckpt.seed = detail::read_u64(in);
    ckpt.epochs_completed = detail::read_u64(in);
    ckpt.global_step = detail::read_u64(in);
    return ckpt;
}

} // namespace ftcl
