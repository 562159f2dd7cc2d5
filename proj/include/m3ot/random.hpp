#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace m3ot {

/// splitmix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ (b + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

/// Platform-stable random source. Only the raw 64-bit engine output (fully
/// specified by the standard for mt19937_64) feeds the distributions below,
/// so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  /// Independent stream for (seed, a, b); e.g. (scenario seed, frame, channel).
  static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return Rng(mix64(mix64(seed, a), b));
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t index(std::size_t n) {
    return n == 0 ? 0 : static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double mean, double sigma) { return sigma > 0.0 ? mean + sigma * normal() : mean; }

  /// Normal truncated to [-bound, bound] standard deviations by resampling.
  double truncated_normal(double sigma, double bound = 3.0) {
    if (sigma <= 0.0) return 0.0;
    for (;;) {
      const double z = normal();
      if (std::abs(z) <= bound) return sigma * z;
    }
  }

  double exponential(double mean) { return mean > 0.0 ? -mean * std::log(1.0 - uniform()) : 0.0; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace m3ot
