#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace crt {

/// Reproducible random stream keyed by (master seed, stream index).
///
/// Streams with different indices are seeded through a SplitMix64 mix of both
/// keys, so trial `i` of an experiment always sees the same draws no matter
/// which worker runs it or in what order. A stream is single-owner: pass it by
/// reference, never share it between threads.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t index = 0);

  /// Derived stream: a fresh, independent stream for a sub-task.
  RngStream substream(std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t index() const noexcept { return index_; }

  static constexpr result_type min() { return std::numeric_limits<result_type>::min(); }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform double on the open interval (0, 1); 53 random bits.
  double uniform();
  /// Uniform double on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::uint64_t seed_;
  std::uint64_t index_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace crt
