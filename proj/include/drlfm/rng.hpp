#pragma once

#include <cstdint>

#include "drlfm/normal.hpp"

namespace drlfm {

// Counter-based 64-bit generator (SplitMix64). A stream is a pure function
// of (seed, stream_id), so parallel replications can each own stream k and
// produce identical draws regardless of scheduling. Normal variates come
// from the inverse CDF, fixed per build; bit-level reproducibility is
// per-platform.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream_id)
      : state_(mix(seed ^ mix(stream_id + 0x9E3779B97F4A7C15ULL))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // [0, 1)
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // [lo, hi)
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  double normal() {
    const double u =
        (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    return normal_quantile(u);
  }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace drlfm
