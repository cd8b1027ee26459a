#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

namespace enmloc {

/// Sequential generator used wherever one stream suffices.
using Rng = std::mt19937_64;

/// SplitMix64: a tiny counter-style generator. Satisfies
/// UniformRandomBitGenerator so std distributions accept it. Used for
/// per-particle streams, where seeding a Mersenne Twister per particle
/// would dominate the update cost.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (one value per call).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream from (seed, a, b), e.g. (seed, step, particle).
inline SplitMix64 derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  SplitMix64 mix(seed ^ 0x2545f4914f6cdd1dULL);
  std::uint64_t key = mix();
  key ^= SplitMix64(a + 0x632be59bd9b4e019ULL)();
  key = SplitMix64(key)();
  key ^= SplitMix64(b + 0x8cb92ba72f3d8dd7ULL)();
  return SplitMix64(key);
}

}  // namespace enmloc
