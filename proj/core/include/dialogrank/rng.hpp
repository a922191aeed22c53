#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dialogrank {

using Rng = std::mt19937_64;

// 64-bit FNV-1a. Used both for vocabulary checksums in the model file and
// for deriving per-dialog RNG streams.
constexpr std::uint64_t kFnvBasis = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = kFnvBasis) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent child stream for (seed, key). Workers that process dialogs in
// parallel each derive their own stream so results do not depend on
// scheduling order.
inline Rng derive_rng(std::uint64_t seed, std::string_view key) {
  return Rng(splitmix64(seed ^ fnv1a64(key)));
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace dialogrank
