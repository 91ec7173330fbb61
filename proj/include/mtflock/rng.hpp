#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "mtflock/errors.hpp"

namespace mtflock {

/// Seeded random source with a portable output stream: the mt19937_64
/// sequence is fixed by the standard, and every draw below is explicit
/// arithmetic on raw 64-bit words, so equal seeds give bit-identical samples
/// regardless of the standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard-normal via Box-Muller; the second value of each pair is cached.
  double standard_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) {
    return mean + sd * standard_normal();
  }

  /// Normal(mean, sd) restricted to [lo, hi] by rejection.
  double truncated_normal(double mean, double sd, double lo, double hi) {
    for (int tries = 0; tries < 100000; ++tries) {
      const double x = normal(mean, sd);
      if (x >= lo && x <= hi) return x;
    }
    throw ConfigError("truncated-normal interval rejects all samples");
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mtflock
