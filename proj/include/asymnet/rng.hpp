#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace asymnet {

/// xoshiro256** seeded through splitmix64.
///
/// Every draw is defined in terms of next_u64() with integer and IEEE double
/// arithmetic only, so a given seed reproduces the same stream on any
/// platform. No std:: distributions are involved (their output is
/// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  std::uint64_t seed() const { return seed_; }

  /// Independent stream for a fixed sub-task offset.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t offset);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace asymnet
