#pragma once

#include <cmath>
#include <cstdint>

namespace wquant::rng {

// Counter-based generator: every draw is a pure function of (seed, counter),
// so parallel fills are schedule-independent. The mixer is SplitMix64
// (Steele, Lea & Flood 2014); stream k of a seed is mix(seed + (k+1)*phi).
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t z = seed + (counter + 1) * kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derive an independent sub-seed for a named stream.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(seed ^ 0xA0761D6478BD642FULL, tag);
}

/// Uniform double in (0, 1]; never 0 so log() is safe.
inline double uniform01(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>((splitmix64(seed, counter) >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal via Box-Muller (cosine branch), 2 counters per draw.
inline double normal(std::uint64_t seed, std::uint64_t counter) {
    const double u1 = uniform01(seed, 2 * counter);
    const double u2 = uniform01(seed, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

} // namespace wquant::rng
