#pragma once

#include <cstdint>
#include <random>

namespace rydsim {

/// splitmix64 finalizer. Used to derive statistically independent streams
/// from (master seed, index) pairs without any sequential dependency, so
/// ensemble shots can run in parallel yet stay reproducible.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for the `index`-th sub-stream of `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64{seed};
}

}  // namespace rydsim
