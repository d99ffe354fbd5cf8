#pragma once
// Counter-free random streams with bit-reproducible output.
//
// Every particle gets its own stream derived from (seed, particle index), so
// draws do not depend on how work is scheduled across threads, and growing the
// number of steps extends a particle's path without disturbing its prefix.
// Normal variates use the Wichura AS 241 inverse CDF and Poisson variates use
// chop-down inversion; both are plain double arithmetic, so streams do not
// depend on the C++ standard library's distribution implementations.

#include <cstdint>

#include "mfj/common.hpp"

namespace mfj {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** seeded via splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }
  // Stream for one particle: mixes the particle id into the seed material.
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t sm = seed ^ (0xd1342543de82ef95ULL * (stream + 1));
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t x, int k) {
      return (x << k) | (x >> (64 - k));
    };
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on (0, 1): 53-bit mantissa, zero excluded so the inverse normal
  // CDF never sees 0.
  double uniform() {
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double normal() { return inverse_normal_cdf(uniform()); }

  // Poisson by chop-down inversion.  Reliable for the per-step intensities we
  // use (lambda * dt well below 1); guarded against the exp underflow regime.
  int poisson(double lambda);

  static double inverse_normal_cdf(double p);

 private:
  std::uint64_t s_[4];
};

}  // namespace mfj
