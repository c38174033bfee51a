#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace modviz {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seed of the named substream `name` keyed by `keys` under the run seed.
/// Every random draw in the toolkit goes through one of these so that any
/// execution order reproduces the same values.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name,
                                    std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = splitmix64(seed ^ fnv1a(name));
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
  return h;
}

inline Rng substream(std::uint64_t seed, std::string_view name,
                     std::initializer_list<std::uint64_t> keys = {}) {
  return Rng(substream_seed(seed, name, keys));
}

}  // namespace modviz
