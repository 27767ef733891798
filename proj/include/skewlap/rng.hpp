#pragma once

#include <cmath>
#include <cstdint>

#include "skewlap/types.hpp"

namespace skewlap {

// Counter-based generator (splitmix64 over an incrementing counter).
// Identical seed gives identical output bit-for-bit on one platform, and
// derive() partitions seed space so parallel shards never overlap streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Hash-combine a stream index into a new independent seed.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the spare is cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  vec_t normal_vec(index_t d) {
    vec_t z(d);
    for (index_t i = 0; i < d; ++i) z[i] = next_normal();
    return z;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace skewlap
