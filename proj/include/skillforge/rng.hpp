#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace skf {

// Deterministic random source. All sampling goes through the methods below so
// that a seed pins the full byte stream independent of the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one value per call, cached pair discarded
  // deliberately to keep the stream position easy to reason about.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) { return n ? engine_() % n : 0; }

  // Derive an independent stream, e.g. one per demo or per restart.
  Rng fork(std::uint64_t salt) {
    return Rng(engine_() ^ (0x9e3779b97f4a7c15ull * (salt + 1)));
  }

 private:
  std::mt19937_64 engine_;
};

// FNV-1a, used for content hashes in bundle metadata.
inline std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace skf
