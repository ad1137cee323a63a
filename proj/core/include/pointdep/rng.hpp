#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pointdep {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent stream seeds from a
/// base seed so that every random draw in the project traces back to one
/// user-supplied integer.
constexpr std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// seed' = mix(mix(base ^ hash(tag)) + index)
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                    std::uint64_t index = 0) {
  return mix_seed(mix_seed(base ^ hash_tag(tag)) + index);
}

inline Rng make_rng(std::uint64_t base, std::string_view tag,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(base, tag, index));
}

}  // namespace pointdep
