#pragma once

#include <cstdint>
#include <random>

namespace molcycle {

// splitmix64; also the mixing step of the fingerprint hash.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ (v + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2)));
}

// One master seed per run; every consumer gets an independent stream keyed by
// a fixed tag so adding a consumer never perturbs the others.
inline std::mt19937_64 make_rng(std::uint64_t master_seed, std::uint64_t tag) {
  return std::mt19937_64(mix64(master_seed ^ mix64(tag)));
}

}  // namespace molcycle
