#pragma once

#include <cmath>
#include <cstdint>

namespace maea {

// Counter-splittable generator: every stream is derived from (seed, stream id)
// so sampling order never depends on thread schedule.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  static SplitMix64 stream(uint64_t seed, uint64_t stream_id) {
    SplitMix64 mixer(seed ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1)));
    mixer.next_u64();  // decorrelate adjacent stream ids
    return mixer;
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal, Box-Muller (no cached spare; keeps streams stateless-ish)
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  uint64_t state_;
};

// Halton low-discrepancy value, index >= 1.
inline double halton(uint64_t index, uint64_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

inline uint64_t nth_prime_base(int dim) {
  static constexpr uint64_t primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  return primes[dim % 12];
}

}  // namespace maea
