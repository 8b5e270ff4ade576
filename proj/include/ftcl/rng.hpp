#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "ftcl/errors.hpp"

namespace ftcl {

namespace detail {

// splitmix64, used only to turn (seed, stream key) into engine seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t k1, std::uint64_t k2) {
    std::uint64_t s = seed;
    std::uint64_t h = splitmix64(s);
    s ^= stream * 0xda942042e4dd58b5ULL;
    h ^= splitmix64(s);
    s ^= k1 + 0x9e3779b97f4a7c15ULL;
    h ^= splitmix64(s);
    s ^= k2 + 0xc2b2ae3d27d4eb4fULL;
    h ^= splitmix64(s);
    return h;
}

} // namespace detail

// Stream identifiers. Each consumer of randomness owns a stream derived from
// the run seed, so enabling/disabling one consumer (telemetry, FT, ...) never
// shifts the draws seen by another.
enum class RngStream : std::uint64_t {
    encoder_init = 1,
    queue_init = 2,
    augment = 3,
    feature_transform = 4,
    shuffle = 5,
    probe = 6,
    synth = 7,
    generic = 8,
};

// Deterministic seeded generator. Identical (seed, stream key) pairs produce
// identical draw sequences; distribution transforms are implemented on raw
// bits so results do not depend on libstdc++ internals.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed)
        : base_seed_(seed), engine_(detail::mix_seed(seed, 0, 0, 0)) {}

    SeededRng(std::uint64_t seed, RngStream stream, std::uint64_t k1 = 0, std::uint64_t k2 = 0)
        : base_seed_(seed),
          engine_(detail::mix_seed(seed, static_cast<std::uint64_t>(stream), k1, k2)) {}

    // Derives an independent stream from the same base seed; the parent's
    // draw position does not influence the child.
    SeededRng stream(RngStream s, std::uint64_t k1 = 0, std::uint64_t k2 = 0) const {
        return SeededRng(base_seed_, s, k1, k2);
    }

    std::uint64_t base_seed() const { return base_seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on the open interval (0, 1).
    double u01() {
        const std::uint64_t bits = next_u64() >> 12; // 52 bits
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
    }

    // Standard normal via Box-Muller; the second value of each pair is
    // cached (the spare travels with copies of the generator).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u = u01();
        const double v = u01();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double angle = 2.0 * std::numbers::pi * v;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

    // Marsaglia-Tsang gamma; the alpha < 1 case is boosted through
    // Gamma(alpha + 1) * U^(1/alpha).
    double gamma(double alpha) {
        if (alpha < 1.0) {
            const double g = gamma(alpha + 1.0);
            return g * std::pow(u01(), 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = u01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Beta via the gamma ratio, clamped into the open unit interval.
    double beta(double alpha, double beta_shape) {
        const double x = gamma(alpha);
        const double y = gamma(beta_shape);
        double r = x / (x + y);
        if (r <= 0.0) r = 0x1.0p-53;
        if (r >= 1.0) r = 1.0 - 0x1.0p-53;
        return r;
    }

    // Unbiased draw from [0, n) (Lemire).
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t bound = n;
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t t = (0 - bound) % bound;
            while (lo < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::size_t>(m >> 64);
    }

private:
    std::uint64_t base_seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Beta draw specification: shape pair plus an offset added after sampling
// (shift = 1 turns a (0,1) draw into the (1,2) extrapolation weight).
struct BetaSample {
    double alpha = 1.0;
    double beta = 1.0;
    double shift = 0.0;
};

inline double sample_beta(const BetaSample& spec, SeededRng& rng) {
    if (spec.alpha <= 0.0 || spec.beta <= 0.0)
        throw InvalidShapeError("sample_beta: shape parameters must be positive");
    return spec.shift + rng.beta(spec.alpha, spec.beta);
}

// Uniform random bijection on {0, ..., n-1} (Fisher-Yates).
inline std::vector<std::size_t> random_permutation(std::size_t n, SeededRng& rng) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

} // namespace ftcl
