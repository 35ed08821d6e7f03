#pragma once

#include <cstdint>
#include <vector>

namespace nuwave {

// Deterministic PRNG: xoshiro256** with splitmix64 seeding, Box-Muller
// normals. The algorithm is fixed so that a given seed produces the same
// draw sequence on every platform and compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01();

  // Uniform in [lo, hi). Throws std::invalid_argument unless lo < hi.
  double uniform(double lo, double hi);

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal. Consumes exactly two raw draws per call.
  double normal();

  std::vector<double> normal_vec(std::size_t n);

  std::uint64_t seed() const { return seed_; }

  // Independent stream for a labelled subtask (training step index,
  // corpus item, ...). Same (seed, label) always yields the same stream.
  static Rng derive(std::uint64_t seed, std::uint64_t label);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

}  // namespace nuwave
