#pragma once

#include <cstdint>
#include <random>

namespace ftpl {

using Rng = std::mt19937_64;

// Engine for work unit `stream` of a run seeded with `seed`. Units are
// independent of execution order, so callers can draw in any order.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                    std::uint32_t(stream >> 32), 0x5eed5eedU};
  return Rng(seq);
}

// Independent child seed for sub-run `index` (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::int64_t poisson_draw(Rng& rng, double mean) {
  if (!(mean > 0)) return 0;
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

}  // namespace ftpl
