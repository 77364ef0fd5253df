#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace nnlm {

using Rng = std::mt19937_64;

/// Independent, reproducible sub-stream seed for (base seed, stream name, indices).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  const auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (unsigned char c : stream) h = mix(h ^ c);
  for (std::uint64_t i : indices) h = mix(h ^ mix(i));
  return h;
}

inline Rng make_rng(std::uint64_t base, std::string_view stream, std::initializer_list<std::uint64_t> indices = {}) {
  return Rng(derive_seed(base, stream, indices));
}

/// Uniform double in [lo, hi) from the raw generator output; identical across standard libraries.
inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform(rng) * static_cast<double>(n)) % n;
}

/// Standard normal via Box-Muller on uniform().
inline double normal(Rng& rng) {
  double u1 = uniform(rng);
  while (u1 <= 0.0) u1 = uniform(rng);
  const double u2 = uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace nnlm
