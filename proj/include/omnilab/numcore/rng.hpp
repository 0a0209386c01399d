#pragma once

#include <cstdint>
#include <random>

namespace omnilab::num {

/// SplitMix64 finaliser (Steele, Lea & Flood): constants 0x9E3779B97F4A7C15,
/// 0xBF58476D1CE4E5B9, 0x94D049BB133111EB.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Sub-seed for an independent stream: splitmix64(seed ^ splitmix64(stream)).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Deterministic pseudo-random source.
///
/// Engine: std::mt19937_64 seeded with the 64-bit seed (its output sequence
/// is fixed by the C++ standard). Uniform doubles take the top 53 bits
/// scaled by 2^-53. Normals use the Box-Muller transform on two uniforms,
/// returning the cosine branch first and caching the sine branch. No
/// std::*_distribution is used, so sequences match across standard
/// libraries and platforms.
class SeededStream {
 public:
  explicit SeededStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [lo, hi] (inclusive), rejection-sampled.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace omnilab::num
