#pragma once

#include <cstdint>

namespace ordsurf {

// splitmix64. The update constants below are a contract: crop positions,
// weight initialization and synthetic tiles must be reproducible across
// implementations, so any reimplementation has to use the same stream.
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, n). Rejection sampling, n >= 1.
  std::uint64_t below(std::uint64_t n) {
    // 2^64 mod n; accept draws in [0, 2^64 - r)
    std::uint64_t r = (UINT64_MAX % n) + 1;
    if (r == n) r = 0;
    std::uint64_t x = next();
    while (r != 0 && x >= std::uint64_t(0) - r) x = next();
    return x % n;
  }

  // Double in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. Always consumes exactly two draws so the
  // stream position does not depend on the values produced.
  double normal();

  // Independent stream for a (seed, index) pair, e.g. one per dataset tile.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 g(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
    return g.next();
  }

 private:
  std::uint64_t state_;
};

}  // namespace ordsurf
