// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see the accompanying LICENSE file.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rpmesh/time.hpp"

namespace rpmesh {

// All randomness in simulations flows through these helpers on top of
// mt19937_64, so results are reproducible across standard libraries (the
// std::*_distribution classes are implementation-defined and would not be).

// splitmix64 finalizer; decorrelates per-node streams derived from one seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(mix_seed(seed, stream));
}

// Uniform in [0, n) by rejection sampling, bias-free.
inline std::uint64_t uniform_u64(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = ~0ull - (~0ull % n);
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

// Uniform double in [0, 1) with 53 significant bits.
inline double uniform_real(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool chance(std::mt19937_64& rng, double p) {
  return uniform_real(rng) < p;
}

inline Duration uniform_duration(std::mt19937_64& rng, Duration lo, Duration hi) {
  if (hi <= lo) return lo;
  const auto span = static_cast<std::uint64_t>((hi - lo).count()) + 1;
  return lo + Duration(static_cast<std::int64_t>(uniform_u64(rng, span)));
}

// Fisher-Yates.
template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_u64(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace rpmesh
