#pragma once

#include <cstdint>
#include <random>

namespace shapnav {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream identifiers for mix_seed, one per consumer of randomness.
namespace streams {
inline constexpr std::uint64_t actor_init = 1;
inline constexpr std::uint64_t critic1_init = 2;
inline constexpr std::uint64_t critic2_init = 3;
inline constexpr std::uint64_t agent = 4;
inline constexpr std::uint64_t train_env = 5;
inline constexpr std::uint64_t eval_env = 6;
inline constexpr std::uint64_t final_eval_env = 7;
inline constexpr std::uint64_t report_env = 8;
inline constexpr std::uint64_t explain_env = 9;
}  // namespace streams

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double sigma) {
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

}  // namespace shapnav
