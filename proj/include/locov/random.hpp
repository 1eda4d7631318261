#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace locov {

using RandomStream = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Mixes a base seed with a key path into an independent 64-bit seed.
/// Distinct key paths give statistically unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = detail::splitmix64(seed);
  for (std::uint64_t k : keys) h = detail::splitmix64(h ^ detail::splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline RandomStream make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  return RandomStream(derive_seed(seed, keys));
}

}  // namespace locov
