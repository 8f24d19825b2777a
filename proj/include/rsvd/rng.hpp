#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace rsvd {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer; bijective 64-bit mix.
inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

// Sequential splitmix64 stream.
struct SplitMix64 {
  std::uint64_t state = 0;

  std::uint64_t next() { return splitmix64_finalize(state += kGoldenGamma); }
};

// Fold one component into a derived seed.
inline std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t component) {
  return splitmix64_finalize(seed ^ (component + 1) * kGoldenGamma);
}

// 53-bit uniform in (0, 1]; safe as the log argument in Box-Muller.
inline double unit_open(std::uint64_t bits) {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// 53-bit uniform in [0, 1).
inline double unit_half_open(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Box-Muller: two standard normal deviates from two 64-bit uniforms.
inline std::pair<double, double> normal_pair(std::uint64_t a, std::uint64_t b) {
  const double u1 = unit_open(a);
  const double u2 = unit_half_open(b);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

// One standard normal deviate addressed purely by a seed.
inline double normal_at(std::uint64_t seed) {
  SplitMix64 g{seed};
  const std::uint64_t a = g.next();
  const std::uint64_t b = g.next();
  return normal_pair(a, b).first;
}

// One uniform [0,1) deviate addressed purely by a seed.
inline double uniform_at(std::uint64_t seed) {
  SplitMix64 g{seed};
  return unit_half_open(g.next());
}

}  // namespace rsvd
