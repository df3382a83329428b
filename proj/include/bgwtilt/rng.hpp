#pragma once

// Counter-based generator keyed by tree paths. Every vertex draws from its own
// key, derived from its parent's key and its child index, so a sample does not
// depend on traversal order or on how work is split across threads.

#include <cstdint>

namespace bgwtilt::rng {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive(std::uint64_t key, std::uint64_t index) {
  return mix64(key ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// Uniform in [0, 1) with 53 random bits.
inline double unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

inline double uniform(std::uint64_t key, std::uint64_t stream) { return unit(derive(key, stream)); }

// Key of a root of the given type in draw number `draw` of run `seed`.
inline std::uint64_t root_key(std::uint64_t seed, std::uint64_t draw, int type) {
  return derive(derive(mix64(seed), draw), static_cast<std::uint64_t>(type) + 1);
}

}  // namespace bgwtilt::rng
