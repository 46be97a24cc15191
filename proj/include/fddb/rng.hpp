#pragma once

#include <cstdint>

namespace fddb {

// Every random draw in the project is keyed by (seed, stream, counter). There
// is no generator state to carry around: a checkpoint only needs the seed and
// the per-stream counters to resume bit-exactly.
enum class RngStream : std::uint64_t {
  kWeightInit = 1,
  kGrain = 2,
  kNcePatches = 3,
  kSyntheticShuffle = 4,
  kRealShuffle = 5,
  kTest = 99,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, RngStream stream,
                                    std::uint64_t counter) noexcept {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream)) ^
                    counter);
}

}  // namespace fddb
