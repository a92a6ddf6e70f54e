/// @file rng.hpp
/// @brief Counter-based random draws built on the SplitMix64 finalizer.
///
/// A draw is a pure function of (seed, stream, counter), so any value can be
/// recomputed independently and in any order. See docs/rng.md for the exact
/// definition and test vectors.
#pragma once

#include <cstdint>

namespace qdbias {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kStreamMultiplier = 0xD1B54A32D192ED03ULL;

/// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix64(seed ^ (stream * kStreamMultiplier))) {}

    constexpr std::uint64_t raw(std::uint64_t counter) const noexcept { return mix64(key_ + (counter + 1) * kGolden); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform(std::uint64_t counter) const noexcept;
    /// Uniform in (0, 1).
    double uniform_open(std::uint64_t counter) const noexcept;
    /// Standard normal by Box-Muller over raw draws 2*counter and 2*counter+1.
    double normal(std::uint64_t counter) const noexcept;
    bool bernoulli(std::uint64_t counter, double p) const noexcept { return uniform(counter) < p; }

private:
    std::uint64_t key_;
};

} // namespace qdbias
