// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace attnquant {

/// Counter-based 64-bit generator (SplitMix64 finalizer over seed + k*GAMMA).
/// Output k depends only on (seed, k), so streams are reproducible and
/// portable; golden files rely on this staying fixed.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed), counter_(0) {}

    std::uint64_t next_u64() { return mix(seed_ + (++counter_) * GAMMA); }

    /// Uniform double in (0, 1]: (top 53 bits + 1) / 2^53.
    double next_unit() {
        const std::uint64_t bits = next_u64() >> 11;
        return static_cast<double>(bits + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the pair's second value is cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = TWO_PI * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

private:
    static constexpr std::uint64_t GAMMA = 0x9E3779B97F4A7C15ull;
    static constexpr double TWO_PI = 6.283185307179586476925286766559;

    std::uint64_t seed_;
    std::uint64_t counter_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace attnquant
