#pragma once

#include <cstdint>

namespace vsr {

// Counter-based generator: every draw is a pure function of (key, counter), so any
// stream can be reproduced or forked without sharing mutable state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Independent child stream; does not advance this generator.
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace vsr
