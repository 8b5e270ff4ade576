#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftcl/errors.hpp"
#include "ftcl/matrix.hpp"
#include "ftcl/rng.hpp"

namespace ftcl {

struct Dataset {
    Matrix samples; // N x dim, values in [0, 1]
    std::optional<std::vector<int>> labels;
    std::string source;

    std::size_t size() const { return samples.rows(); }
    std::size_t dim() const { return samples.cols(); }

    int num_classes() const {
        if (!labels) return 0;
        int mx = -1;
        for (int l : *labels) mx = std::max(mx, l);
        return mx + 1;
    }
};

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw TruncatedError("load_idx: truncated while reading " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

} // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803; // 2051
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801; // 2049

// IDX image/label pair (big-endian headers, ubyte payloads). Pixels are
// scaled to [0, 1].
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("load_idx: cannot open " + images_path.string());
    const std::uint32_t img_magic = detail::read_be_u32(img, "image magic");
    if (img_magic != kIdxImageMagic)
        throw BadMagicError("load_idx: bad image magic in " + images_path.string());
    const std::uint32_t n = detail::read_be_u32(img, "image count");
    const std::uint32_t rows = detail::read_be_u32(img, "row count");
    const std::uint32_t cols = detail::read_be_u32(img, "column count");
    const std::size_t dim = std::size_t(rows) * cols;

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("load_idx: cannot open " + labels_path.string());
    const std::uint32_t lab_magic = detail::read_be_u32(lab, "label magic");
    if (lab_magic != kIdxLabelMagic)
        throw BadMagicError("load_idx: bad label magic in " + labels_path.string());
    const std::uint32_t n_lab = detail::read_be_u32(lab, "label count");
    if (n_lab != n)
        throw CountMismatchError("load_idx: image/label counts disagree");

    Dataset d;
    d.source = "idx:" + images_path.string();
    d.samples = Matrix(n, dim);
    std::vector<unsigned char> buf(dim);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim)))
            throw TruncatedError("load_idx: image payload truncated");
        auto row = d.samples.row(i);
        for (std::size_t j = 0; j < dim; ++j) row[j] = buf[j] / 255.0;
    }
    std::vector<int> labels(n);
    std::vector<unsigned char> lbuf(n);
    if (!lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(n)))
        throw TruncatedError("load_idx: label payload truncated");
    for (std::uint32_t i = 0; i < n; ++i) labels[i] = lbuf[i];
    d.labels = std::move(labels);
    return d;
}

// Rectangular numeric CSV; first line may be a header (detected by a
// non-numeric first field). Optional label column is extracted by index.
inline Dataset load_csv(const std::filesystem::path& path,
                        std::optional<std::size_t> label_column = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_csv: cannot open " + path.string());

    auto split = [](const std::string& line) {
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur += c;
            }
        }
        fields.push_back(cur);
        return fields;
    };
    auto numeric = [](const std::string& s, double& out) {
        if (s.empty()) return false;
        char* end = nullptr;
        out = std::strtod(s.c_str(), &end);
        return end == s.c_str() + s.size();
    };

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = split(line);
        if (first) {
            first = false;
            double v;
            if (!numeric(fields[0], v)) continue; // header row
        }
        if (width == 0) width = fields.size();
        else if (fields.size() != width)
            throw RaggedRowsError("load_csv: ragged row in " + path.string());
        if (label_column && *label_column >= width)
            throw ConfigError("load_csv: label column out of range");
        std::vector<double> row;
        row.reserve(width);
        for (std::size_t j = 0; j < fields.size(); ++j) {
            double v;
            if (!numeric(fields[j], v))
                throw NonNumericError("load_csv: non-numeric field '" + fields[j] + "'");
            if (label_column && j == *label_column) {
                labels.push_back(static_cast<int>(v));
            } else {
                row.push_back(v);
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("load_csv: no data rows in " + path.string());

    Dataset d;
    d.source = "csv:" + path.string();
    d.samples = Matrix(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), d.samples.row(i).begin());
    if (label_column) d.labels = std::move(labels);
    return d;
}

// Gaussian mixture for oracle tests: class means are random unit directions
// scaled by `separation`, noise is isotropic unit-variance; the whole matrix
// is then affinely rescaled into [0, 1].
inline Dataset synth_gaussian_mixture(std::size_t classes, std::size_t per_class,
                                      std::size_t dim, double separation,
                                      std::uint64_t seed) {
    SeededRng rng = SeededRng(seed).stream(RngStream::synth);
    Matrix means(classes, dim);
    for (std::size_t c = 0; c < classes; ++c) {
        auto m = means.row(c);
        double norm2 = 0.0;
        for (auto& v : m) {
            v = rng.normal();
            norm2 += v * v;
        }
        const double scale = separation / std::max(std::sqrt(norm2), 1e-300);
        for (auto& v : m) v *= scale;
    }

    Dataset d;
    d.source = "synthetic";
    d.samples = Matrix(classes * per_class, dim);
    std::vector<int> labels(classes * per_class);
    std::size_t idx = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t s = 0; s < per_class; ++s, ++idx) {
            auto row = d.samples.row(idx);
            auto m = means.row(c);
            for (std::size_t j = 0; j < dim; ++j) row[j] = m[j] + rng.normal();
            labels[idx] = static_cast<int>(c);
        }
    }
    d.labels = std::move(labels);

    double lo = d.samples.data()[0], hi = lo;
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        lo = std::min(lo, d.samples.data()[i]);
        hi = std::max(hi, d.samples.data()[i]);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < d.samples.size(); ++i)
        d.samples.data()[i] = (d.samples.data()[i] - lo) / span;
    return d;
}

enum class AugKind { none, image, vector };

// Two-view augmentation policy. Image ops need a square-reshapable input;
// vector ops work on any dimension. All strengths zero = identity.
struct AugPolicy {
    AugKind kind = AugKind::none;
    // image ops
    double shift = 0.0;      // max |dx|,|dy| in pixels (crop-and-pad translate)
    double noise = 0.0;      // additive Gaussian sigma (image and vector)
    double erase_prob = 0.0; // probability of zeroing a random square
    std::size_t erase_size = 0;
    bool flip = false; // horizontal flip with p = 0.5
    // vector ops
    double dropout = 0.0; // per-coordinate zeroing probability
};

struct ViewPair {
    std::vector<double> v_q;
    std::vector<double> v_k;
};

namespace detail {

inline void augment_image(std::vector<double>& x, std::size_t side, const AugPolicy& p,
                          SeededRng& rng) {
    if (p.shift > 0.0) {
        const auto s = static_cast<long>(p.shift);
        const long dx = static_cast<long>(rng.uniform_index(2 * s + 1)) - s;
        const long dy = static_cast<long>(rng.uniform_index(2 * s + 1)) - s;
        if (dx != 0 || dy != 0) {
            std::vector<double> shifted(x.size(), 0.0);
            const auto n = static_cast<long>(side);
            for (long r = 0; r < n; ++r) {
                const long sr = r - dy;
                if (sr < 0 || sr >= n) continue;
                for (long c = 0; c < n; ++c) {
                    const long sc = c - dx;
                    if (sc < 0 || sc >= n) continue;
                    shifted[r * n + c] = x[sr * n + sc];
                }
            }
            x = std::move(shifted);
        }
    }
    if (p.flip && rng.u01() < 0.5) {
        for (std::size_t r = 0; r < side; ++r)
            std::reverse(x.begin() + static_cast<std::ptrdiff_t>(r * side),
                         x.begin() + static_cast<std::ptrdiff_t>((r + 1) * side));
    }
    if (p.erase_prob > 0.0 && p.erase_size > 0 && rng.u01() < p.erase_prob) {
        const std::size_t sz = std::min(p.erase_size, side);
        const std::size_t r0 = rng.uniform_index(side - sz + 1);
        const std::size_t c0 = rng.uniform_index(side - sz + 1);
        for (std::size_t r = r0; r < r0 + sz; ++r)
            for (std::size_t c = c0; c < c0 + sz; ++c) x[r * side + c] = 0.0;
    }
    if (p.noise > 0.0) {
        for (auto& v : x) v = std::clamp(v + p.noise * rng.normal(), 0.0, 1.0);
    }
}

inline void augment_vector(std::vector<double>& x, const AugPolicy& p, SeededRng& rng) {
    if (p.noise > 0.0)
        for (auto& v : x) v += p.noise * rng.normal();
    if (p.dropout > 0.0)
        for (auto& v : x)
            if (rng.u01() < p.dropout) v = 0.0;
}

} // namespace detail

// Two independent draws of the same policy applied to x. The rng stream is
// keyed by (epoch, sample index) upstream, so the pair depends only on the
// sample, not on batch order.
inline ViewPair two_view_augment(std::span<const double> x, SeededRng& rng,
                                 const AugPolicy& policy) {
    ViewPair vp;
    vp.v_q.assign(x.begin(), x.end());
    vp.v_k.assign(x.begin(), x.end());
    if (policy.kind == AugKind::none) return vp;
    if (policy.kind == AugKind::image) {
        const auto side = static_cast<std::size_t>(std::lround(std::sqrt(double(x.size()))));
        if (side * side != x.size())
            throw BadShapeError("two_view_augment: image policy needs a square input");
        detail::augment_image(vp.v_q, side, policy, rng);
        detail::augment_image(vp.v_k, side, policy, rng);
    } else {
        detail::augment_vector(vp.v_q, policy, rng);
        detail::augment_vector(vp.v_k, policy, rng);
    }
    return vp;
}

} // namespace ftcl
