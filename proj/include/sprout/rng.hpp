#pragma once

#include <cstdint>

namespace sprout {

/**
 * PCG32 (XSH-RR output on a 64-bit LCG), seeded as pcg32_srandom_r.
 *
 * Every draw method advances the generator by exactly one step, so two
 * generators with the same seed and stream stay in lockstep regardless of
 * which draw kinds are interleaved.
 */
class Rng {
 public:
  static constexpr std::uint64_t kDefaultStream = 54;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = kDefaultStream);

  std::uint32_t next_u32();
  /// Uniform in [0, 1) with 32 bits of resolution.
  double uniform();
  /// Uniform in [lo, hi); returns lo when lo == hi.
  double uniform(double lo, double hi);
  /// Integer in [0, bound) by multiply-shift; bound must be positive.
  std::uint32_t below(std::uint32_t bound);
  bool coin() { return (next_u32() >> 31) != 0; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t steps() const { return steps_; }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
  std::uint64_t seed_ = 0;
  std::uint64_t steps_ = 0;
};

/// splitmix64 finalizer; used to derive well-separated child seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace sprout
