#pragma once

// Shared helpers for the test suites: scratch directories, an IDX writer, a
// regularized incomplete beta (the KS-test oracle), a small XML
// well-formedness checker, and the synthetic image dataset used by the
// trend tests.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "ftcl/data.hpp"
#include "ftcl/matrix.hpp"
#include "ftcl/rng.hpp"

namespace test_support {

class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("ftcl_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_be_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

// values in [0,1], row-major, one row per image
inline void write_idx_images(const std::filesystem::path& path, const ftcl::Matrix& images,
                             std::size_t rows, std::size_t cols) {
    std::ofstream out(path, std::ios::binary);
    write_be_u32(out, 0x00000803);
    write_be_u32(out, static_cast<std::uint32_t>(images.rows()));
    write_be_u32(out, static_cast<std::uint32_t>(rows));
    write_be_u32(out, static_cast<std::uint32_t>(cols));
    for (std::size_t i = 0; i < images.rows(); ++i) {
        for (double v : images.row(i)) {
            const auto byte = static_cast<unsigned char>(
                std::clamp(std::lround(v * 255.0), 0L, 255L));
            out.put(static_cast<char>(byte));
        }
    }
}

inline void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
    std::ofstream out(path, std::ios::binary);
    write_be_u32(out, 0x00000801);
    write_be_u32(out, static_cast<std::uint32_t>(labels.size()));
    for (int l : labels) out.put(static_cast<char>(l));
}

// ---- regularized incomplete beta I_x(a, b): analytic Beta CDF oracle ----

inline double beta_cf(double a, double b, double x) {
    const int max_it = 300;
    const double eps = 3e-14, fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_it; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

inline double beta_cdf(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                               a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
    return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

// One-sample Kolmogorov-Smirnov statistic against the given CDF.
template <typename Cdf>
inline double ks_statistic(std::vector<double> samples, Cdf cdf) {
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

// Asymptotic KS critical value at significance alpha.
inline double ks_critical(double alpha, std::size_t n) {
    return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

// ---- minimal XML well-formedness check (tags balance, single root) ----

inline bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    bool seen_root = false;
    while (i < text.size()) {
        if (text[i] != '<') {
            ++i;
            continue;
        }
        const std::size_t close = text.find('>', i);
        if (close == std::string::npos) return false;
        std::string tag = text.substr(i + 1, close - i - 1);
        i = close + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?' || (tag.size() >= 3 && tag.rfind("!--", 0) == 0)) continue;
        if (tag[0] == '/') {
            if (stack.empty()) return false;
            const std::string name = tag.substr(1);
            if (stack.back() != name) return false;
            stack.pop_back();
            continue;
        }
        const bool self_closing = tag.back() == '/';
        if (self_closing) tag.pop_back();
        std::string name = tag.substr(0, tag.find_first_of(" \t\n\r"));
        if (name.empty()) return false;
        if (stack.empty()) {
            if (seen_root && !self_closing) return false;
            seen_root = true;
        }
        if (!self_closing) stack.push_back(name);
    }
    return stack.empty() && seen_root;
}

// ---- synthetic image dataset for the trend suite -----------------------
//
// Ten 28x28 grayscale classes: each class has a fixed smooth random motif
// placed at a per-sample jittered position with amplitude jitter and additive
// pixel noise. Class identity is carried by the motif shape; position is a
// nuisance the encoder has to become invariant to.

struct SynthImageParams {
    std::size_t classes = 10;
    std::size_t per_class = 1000;
    std::size_t side = 28;
    std::size_t motif = 14;
    std::size_t jitter = 5;       // max |dx|,|dy| of motif placement
    double noise = 0.12;          // pixel noise sigma
    double amp_min = 0.7;         // amplitude jitter range
    double clutter = 0.0;         // amplitude of a wrong-class distractor motif
    std::uint64_t seed = 1234;    // per-sample draws (position, amplitude, noise)
    std::uint64_t motif_seed = 500; // class identities; shared across splits
};

inline ftcl::Dataset make_synth_images(const SynthImageParams& p) {
    ftcl::SeededRng rng(p.seed);
    // per-class motifs: random field smoothed twice for blob structure
    std::vector<std::vector<double>> motifs;
    for (std::size_t c = 0; c < p.classes; ++c) {
        ftcl::SeededRng mrng = ftcl::SeededRng(p.motif_seed).stream(ftcl::RngStream::generic,
                                                                    1000 + c);
        std::vector<double> m(p.motif * p.motif);
        for (auto& v : m) v = mrng.u01();
        for (int pass = 0; pass < 2; ++pass) {
            std::vector<double> s(m.size(), 0.0);
            for (std::size_t r = 0; r < p.motif; ++r) {
                for (std::size_t q = 0; q < p.motif; ++q) {
                    double acc = 0.0;
                    int cnt = 0;
                    for (int dr = -1; dr <= 1; ++dr) {
                        for (int dq = -1; dq <= 1; ++dq) {
                            const long rr = static_cast<long>(r) + dr;
                            const long qq = static_cast<long>(q) + dq;
                            if (rr < 0 || qq < 0 || rr >= static_cast<long>(p.motif) ||
                                qq >= static_cast<long>(p.motif))
                                continue;
                            acc += m[rr * p.motif + qq];
                            ++cnt;
                        }
                    }
                    s[r * p.motif + q] = acc / cnt;
                }
            }
            m = std::move(s);
        }
        double lo = m[0], hi = m[0];
        for (double v : m) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        for (auto& v : m) v = (v - lo) / (hi - lo + 1e-12);
        motifs.push_back(std::move(m));
    }

    ftcl::Dataset d;
    d.source = "synthetic-images";
    d.samples = ftcl::Matrix(p.classes * p.per_class, p.side * p.side);
    std::vector<int> labels(p.classes * p.per_class);
    const std::size_t base = (p.side - p.motif) / 2;
    // classes interleave so any prefix of the dataset stays class-balanced
    for (std::size_t c = 0; c < p.classes; ++c) {
        for (std::size_t s = 0; s < p.per_class; ++s) {
            const std::size_t idx = s * p.classes + c;
            ftcl::SeededRng srng = rng.stream(ftcl::RngStream::generic, 2000 + c, s);
            auto row = d.samples.row(idx);
            const long dx = static_cast<long>(srng.uniform_index(2 * p.jitter + 1)) -
                            static_cast<long>(p.jitter);
            const long dy = static_cast<long>(srng.uniform_index(2 * p.jitter + 1)) -
                            static_cast<long>(p.jitter);
            const double amp = p.amp_min + (1.0 - p.amp_min) * srng.u01();
            auto stamp = [&](const std::vector<double>& m, double a, long ox, long oy) {
                for (std::size_t r = 0; r < p.motif; ++r) {
                    for (std::size_t q = 0; q < p.motif; ++q) {
                        const long rr = static_cast<long>(base + r) + oy;
                        const long qq = static_cast<long>(base + q) + ox;
                        if (rr < 0 || qq < 0 || rr >= static_cast<long>(p.side) ||
                            qq >= static_cast<long>(p.side))
                            continue;
                        row[rr * p.side + qq] += a * m[r * p.motif + q];
                    }
                }
            };
            if (p.clutter > 0.0) {
                // distractor from another class, placed first so the true
                // motif overwrites on overlap
                const std::size_t other =
                    (c + 1 + srng.uniform_index(p.classes - 1)) % p.classes;
                const long cx = static_cast<long>(srng.uniform_index(2 * p.jitter + 1)) -
                                static_cast<long>(p.jitter);
                const long cy = static_cast<long>(srng.uniform_index(2 * p.jitter + 1)) -
                                static_cast<long>(p.jitter);
                const double ca = p.clutter * (0.5 + 0.5 * srng.u01());
                stamp(motifs[other], ca, cx, cy);
            }
            stamp(motifs[c], amp, dx, dy);
            for (auto& v : row) v = std::clamp(v, 0.0, 1.0);
            if (p.noise > 0.0)
                for (auto& v : row) v = std::clamp(v + p.noise * srng.normal(), 0.0, 1.0);
            labels[idx] = static_cast<int>(c);
        }
    }
    d.labels = std::move(labels);
    return d;
}

// Writes the dataset as an IDX pair and returns the two paths.
inline std::pair<std::filesystem::path, std::filesystem::path> write_idx_dataset(
    const ftcl::Dataset& d, const std::filesystem::path& dir, const std::string& stem,
    std::size_t side) {
    const auto images = dir / (stem + "-images-idx3-ubyte");
    const auto labels = dir / (stem + "-labels-idx1-ubyte");
    write_idx_images(images, d.samples, side, side);
    write_idx_labels(labels, *d.labels);
    return {images, labels};
}

} // namespace test_support
