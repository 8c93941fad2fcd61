#pragma once

#include <cstdint>
#include <random>

namespace aptest {

using Rng = std::mt19937_64;

/// Stream identifiers used when deriving replicate streams from a master seed.
/// Keeping them fixed means a cell's random numbers do not depend on which
/// other cells run in the same invocation.
namespace streams {
inline constexpr std::uint64_t kCalibration = 0;
inline constexpr std::uint64_t kEvaluation = 1;       // + model index
inline constexpr std::uint64_t kErComparator = 1000;  // + model index
}  // namespace streams

/// SplitMix64 finalizer: a bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based split: the stream for (seed, stream, replicate) is a pure
/// function of its key, so serial and parallel runs draw identical numbers.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t replicate) {
    return Rng(mix64(seed ^ mix64(stream ^ mix64(replicate))));
}

/// Uniform draw on [0, 1).
inline double uniform01(Rng& rng) { return std::generate_canonical<double, 53>(rng); }

}  // namespace aptest
