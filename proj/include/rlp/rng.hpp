#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>

namespace rlp {

/// Which consumer of randomness a stream belongs to. Streams are derived
/// independently so that, e.g., swapping the attacker cannot shift the
/// environment's noise sequence.
enum class StreamRole : std::uint64_t { Environment = 0, Learner = 1, Attacker = 2 };

namespace detail {
// splitmix64 finalizer; good enough to decorrelate nearby seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

/// Derives the seed of the independent stream for (root, learner, role).
inline std::uint64_t stream_seed(std::uint64_t root, int learner_index, StreamRole role) {
    const std::uint64_t tag =
        detail::mix64(static_cast<std::uint64_t>(learner_index) * 8ULL +
                      static_cast<std::uint64_t>(role) + 1ULL);
    return detail::mix64(root ^ tag);
}

inline std::mt19937_64 make_stream(std::uint64_t root, int learner_index, StreamRole role) {
    return std::mt19937_64(stream_seed(root, learner_index, role));
}

/// Uniform double in the open interval (0, 1). Hand-rolled so that streams
/// are reproducible independent of the standard library implementation.
inline double uniform01(std::mt19937_64& g) {
    return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller (single value per call).
inline double gaussian(std::mt19937_64& g) {
    const double u1 = uniform01(g);
    const double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline bool bernoulli_half(std::mt19937_64& g) { return uniform01(g) < 0.5; }

/// Samples an index from a probability vector by inverse CDF.
inline int sample_categorical(std::span<const double> probs, std::mt19937_64& g) {
    const double u = uniform01(g);
    double cum = 0.0;
    for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
        cum += probs[i];
        if (u <= cum) return i;
    }
    return static_cast<int>(probs.size()) - 1; // cumulative round-off
}

} // namespace rlp
