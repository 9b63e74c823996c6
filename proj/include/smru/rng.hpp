// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace smru {

// SplitMix64. Fixed constants so that seeded weight files and synthetic
// scenes regenerate bit-identically on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit mantissa.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  float uniform(float lo, float hi) {
    return lo + static_cast<float>(next_double()) * (hi - lo);
  }

  // Box-Muller; consumes two draws per pair, second value cached.
  float gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 6.283185307179586 * u2;
    spare_ = static_cast<float>(r * std::sin(th));
    have_spare_ = true;
    return static_cast<float>(r * std::cos(th));
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  float spare_ = 0.0f;
};

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Stable per-name sub-seed so parameter init does not depend on creation order.
inline uint64_t derive_seed(uint64_t seed, std::string_view name) {
  SplitMix64 mix(seed ^ fnv1a64(name));
  return mix.next_u64();
}

}  // namespace smru
