#pragma once

#include <cstdint>

namespace pxc {

// Deterministic generator used everywhere randomness is needed.
// splitmix64 (Steele et al.): the full output sequence is a pure function of
// the 64-bit seed, with no dependence on the standard library, so identical
// seeds reproduce identical scenes/weights/samples run after run.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound), bound > 0. Rejection sampling.
  uint64_t below(uint64_t bound) {
    const uint64_t threshold = -bound % bound;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Inclusive range.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo) + 1));
  }

  // 53-bit mantissa value in [0, 1).
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Derives an independent stream from (seed, index) pairs.
  static uint64_t mix(uint64_t seed, uint64_t index) {
    Rng r(seed ^ (0x9e3779b97f4a7c15ull * (index + 1)));
    return r.next_u64();
  }

 private:
  uint64_t state_;
};

}  // namespace pxc
