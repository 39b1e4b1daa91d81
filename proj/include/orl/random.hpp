#pragma once

#include <cstdint>
#include <random>

namespace orl {

using Rng = std::mt19937_64;

// Fixed stream offsets. Every random consumer in a run derives its generator
// from the master seed and one of these ids, so adding a consumer never shifts
// the draws of another.
namespace stream {
inline constexpr std::uint64_t kRoster = 1;
inline constexpr std::uint64_t kMeals = 2;
inline constexpr std::uint64_t kCollect = 3;
inline constexpr std::uint64_t kExpert = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kBatch = 6;
inline constexpr std::uint64_t kPolicySample = 7;
inline constexpr std::uint64_t kEval = 8;
inline constexpr std::uint64_t kValidation = 9;
inline constexpr std::uint64_t kBootstrap = 10;
inline constexpr std::uint64_t kCalibration = 11;
inline constexpr std::uint64_t kFqe = 12;
}  // namespace stream

/// splitmix64 finaliser; used to turn (seed, stream, index) into well-spread seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id,
                                    std::uint64_t index = 0) {
  return mix64(mix64(mix64(master) ^ stream_id) + index);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream_id, std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream_id, index));
}

/// Uniform double in [0, 1) with 53 random bits. Spelled out instead of
/// std::uniform_real_distribution so draws are identical across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n). Lemire-style rejection keeps it unbiased.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

}  // namespace orl
