#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace s2wat {

/// Deterministic random source. Distributions are implemented by hand so
/// streams do not depend on the standard library's implementation-defined
/// distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Normal(0, std) truncated by resampling to |x| <= 2*std.
  double trunc_normal(double std_dev) {
    double x = normal() * std_dev;
    while (std::fabs(x) > 2.0 * std_dev) x = normal() * std_dev;
    return x;
  }

  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) { return n ? gen_() % n : 0; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace s2wat
