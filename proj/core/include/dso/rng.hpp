#pragma once

#include <cstdint>
#include <random>

namespace dso {

using Rng = std::mt19937_64;

/// Derives an independent generator from a base seed and a stream index.
/// Mask sampling, weight initialization and data shuffling each use their
/// own stream so that one source of randomness can be varied in isolation.
inline Rng make_rng(std::uint64_t seed, std::uint32_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32), stream};
    return Rng(seq);
}

} // namespace dso
