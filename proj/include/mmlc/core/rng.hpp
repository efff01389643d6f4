#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mmlc {

// Deterministic stream-indexed RNG. The engine (std::mt19937_64) is fully
// specified by the standard, so the integer sequence for a given
// (seed, stream_id) is identical across platforms. Real-valued draws are
// built from the integer output with explicit arithmetic; normal variates
// use Box-Muller.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : engine_(mix(seed, stream_id)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller; u1 bounded away from 0.
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0x1.0p-53);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Derived stream, independent of draws made so far on this one.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t child) {
    return mix(seed, child);
  }

 private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream_id) {
    // SplitMix64 over seed xor golden-ratio-spread stream id.
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream_id + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mmlc
