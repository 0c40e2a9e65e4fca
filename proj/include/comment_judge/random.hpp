#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace comment_judge {

// std::mt19937_64 output is fully specified by the standard, but the
// distributions are not; these helpers keep every seeded path bit-identical
// across standard library implementations.
using Rng = std::mt19937_64;

/// Uniform integer in [0, bound) by rejection sampling.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound);
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return draw % bound;
}

/// Uniform real in [0, 1) with 53 bits of precision.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform_real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace comment_judge
