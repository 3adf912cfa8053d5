#pragma once

#include <cstdint>

#include "vbald/linop.hpp"

namespace vbald {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Probe `index` of stream `seed`, components i.i.d. +-1.
///
/// Counter based: each 64-component block is a hash of (seed, index, block),
/// so any probe can be regenerated on its own and the result does not depend
/// on which worker draws it or in what order.
inline Vector rademacher_probe(Index n, std::uint64_t seed, std::uint64_t index) {
  if (n < 1) throw DimensionError("rademacher_probe: n must be positive");
  Vector z(n);
  const std::uint64_t key = splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ULL));
  std::uint64_t bits = 0;
  for (Index i = 0; i < n; ++i) {
    if (i % 64 == 0) bits = splitmix64(key + static_cast<std::uint64_t>(i / 64));
    z[i] = (bits & 1ULL) ? 1.0 : -1.0;
    bits >>= 1;
  }
  return z;
}

/// Order-sensitive running hash of the probe vectors an estimator consumed.
struct ProbeFingerprint {
  std::uint64_t value = 0xCBF29CE484222325ULL;

  void add(const Vector& z) {
    for (Index i = 0; i < z.size(); ++i) {
      value ^= (z[i] > 0.0) ? 0x1ULL : 0x2ULL;
      value *= 0x100000001B3ULL;
    }
  }
};

/// Fingerprint of probes 0..probes-1 of stream `seed`, used to show that
/// paired estimators consumed identical probes.
inline std::uint64_t probe_checksum(Index n, std::uint64_t seed, int probes) {
  ProbeFingerprint fp;
  for (int j = 0; j < probes; ++j) fp.add(rademacher_probe(n, seed, static_cast<std::uint64_t>(j)));
  return fp.value;
}

}  // namespace vbald
