#pragma once

// Counter-based, splittable pseudo-randomness.
//
// Every random decision in the simulator draws from a Stream keyed by
// (master seed, purpose tag, up to three integer coordinates such as round /
// client / local step). Streams are stateless functions of their key plus a
// local counter, so any part of a run can be regenerated in isolation —
// schedules don't depend on model evaluation order, resuming from a checkpoint
// replays the exact same noise, and parallel workers can't perturb each other.
//
// The generator is the SplitMix64 finalizer applied to key + counter*gamma
// (a Weyl sequence). That construction passes the usual statistical batteries
// and, unlike std:: distributions, produces identical streams on every
// platform we build on.

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace fedsim::rng {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Hash a (seed, tag, coords...) tuple into a stream key. Components are
// absorbed sequentially through the mixer so e.g. ("grad", round=1, client=2)
// and ("grad", round=2, client=1) land far apart.
inline std::uint64_t derive_key(std::uint64_t seed, std::string_view tag,
                                std::uint64_t a = 0, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
    std::uint64_t h = mix64(seed ^ 0x243F6A8885A308D3ull);
    for (unsigned char ch : tag) {
        h = mix64(h ^ (static_cast<std::uint64_t>(ch) + kGamma));
    }
    h = mix64(h ^ (a + kGamma));
    h = mix64(h ^ (b + kGamma));
    h = mix64(h ^ (c + kGamma));
    return h;
}

class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return mix64(key_ + (++ctr_) * kGamma); }

    // Uniform double in [0, 1), 53 mantissa bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in (0, 1] — safe to pass through log().
    double next_double_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via Box–Muller. Two uniforms per deviate; the sine twin
    // is discarded to keep the stream position a simple function of the draw
    // count.
    double next_normal() {
        const double u1 = next_double_pos();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Unbiased integer in [0, n) by rejection (arc4random_uniform scheme).
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            std::swap(first[i - 1], first[next_below(i)]);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

inline Stream substream(std::uint64_t seed, std::string_view tag,
                        std::uint64_t a = 0, std::uint64_t b = 0,
                        std::uint64_t c = 0) {
    return Stream(derive_key(seed, tag, a, b, c));
}

// Gamma(alpha, 1) via Marsaglia–Tsang, with the standard alpha < 1 boost.
// Used by the Dirichlet partitioner.
inline double sample_gamma(Stream& s, double alpha) {
    if (alpha < 1.0) {
        const double u = s.next_double_pos();
        return sample_gamma(s, alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
        const double x = s.next_normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = s.next_double_pos();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

} // namespace fedsim::rng
