#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ulu {

// All randomness in the library flows through this wrapper: mt19937_64
// plus fixed bit-to-double mappings, so runs are reproducible for a given
// seed within this implementation (cross-language bit-exactness is not a
// goal).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1): top 53 bits scaled by 2^-53.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  uint64_t index(uint64_t n);

  // Standard normal via Box-Muller (one value per call; the pair's second
  // member is cached).
  double gaussian();

  // Fisher-Yates over 0..n-1.
  std::vector<int64_t> permutation(int64_t n);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ulu
