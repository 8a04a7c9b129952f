#pragma once

#include <cstdint>
#include <random>

namespace abidnn {

/// Seeded generator with platform-independent real-valued draws.
///
/// std::uniform_real_distribution is implementation-defined, so draws are derived
/// directly from the 64-bit engine output to keep runs bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double open01() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform on [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Uniform on the open interval (lo, hi).
  double open(double lo, double hi) { return lo + (hi - lo) * open01(); }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace abidnn
