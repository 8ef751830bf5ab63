#pragma once

// Seeding and random-number helpers shared by every sampler. All streams are
// std::mt19937_64 seeded from a 64-bit avalanche mix, so replicas, vertices
// and vertex pairs get independent, reproducible streams.

#include <cmath>
#include <cstdint>
#include <random>

namespace bsrlab {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Seed for stream `index` under `seed`: mix64(seed ^ mix64(index)).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index + 0x632be59bd9b4e019ull));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform double in (0, 1], safe to take logs of.
inline double uniform_open0(Rng& rng) { return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; }

/// Counter-based uniform in (0, 1] keyed by (seed, i, j); no state is stored.
inline double keyed_uniform(std::uint64_t seed, std::uint64_t i, std::uint64_t j) {
  const std::uint64_t z = derive_seed(seed, i, j);
  return (static_cast<double>(z >> 11) + 1.0) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by Lemire's multiply-shift with rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  std::uint64_t x = rng();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = rng();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

inline double exponential(Rng& rng, double rate) { return -std::log(uniform_open0(rng)) / rate; }

inline std::uint64_t poisson(Rng& rng, double mean) {
  if (!(mean > 0)) return 0;
  std::poisson_distribution<std::uint64_t> d(mean);
  return d(rng);
}

}  // namespace bsrlab
