#pragma once

#include <cstdint>
#include <string>

namespace mmlc::run {

// Pure function of (master seed, experiment, d_z, rep): no cell seed
// depends on sweep order or parallelism.
inline std::uint64_t cell_seed(std::uint64_t master, const std::string& experiment,
                               int d_z, int rep) {
  // FNV-1a over the experiment name, then SplitMix-style mixing.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : experiment) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = master ^ h;
  auto mix = [](std::uint64_t v) {
    v += 0x9E3779B97F4A7C15ull;
    v = (v ^ (v >> 30)) * 0xBF58476D1CE4E5B9ull;
    v = (v ^ (v >> 27)) * 0x94D049BB133111EBull;
    return v ^ (v >> 31);
  };
  z = mix(z + static_cast<std::uint64_t>(d_z) * 0x100000001B3ull);
  z = mix(z + static_cast<std::uint64_t>(rep));
  return z;
}

}  // namespace mmlc::run
