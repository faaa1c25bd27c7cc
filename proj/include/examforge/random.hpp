#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace examforge {

/// Unbiased draw from [0, bound) by rejection. Unlike
/// std::uniform_int_distribution the result is identical on every standard
/// library, which keeps seeded datasets reproducible across toolchains.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

/// Fisher-Yates with uniform_below.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace examforge
