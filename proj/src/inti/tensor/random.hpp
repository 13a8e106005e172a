#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace inti {

// Seeded generator. The distributions are implemented here rather than with
// <random> distribution classes, whose output is implementation-defined, so
// streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Box-Muller, one draw per call.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::vector<double> normal_vector(std::size_t n, double stddev = 1.0);
  std::vector<double> uniform_vector(std::size_t n, double lo = 0.0, double hi = 1.0);

  // Derives an independent seed for a named sub-stream.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

}  // namespace inti
