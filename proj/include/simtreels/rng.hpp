#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace simtreels {

/// SplitMix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Counter-based pseudo-random generator with cheap splitting.
///
/// A stream is identified by a 64-bit key; draws are mix64(key + i*gamma)
/// for i = 1, 2, ...  `child(tag)` derives an independent stream from the
/// key alone, so sub-streams do not depend on how much the parent has been
/// consumed. This is what makes generation order-independent: a branch, a
/// pose or a scan line can own a stream derived from its identity and
/// produce the same values no matter which worker touches it first.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x53696D544C53ull)) {}

  /// Independent sub-stream for `tag`; does not consume state.
  Rng child(std::uint64_t tag) const {
    Rng r;
    r.key_ = mix64(key_ ^ mix64(tag ^ 0xC2B2AE3D27D4EB4Full));
    return r;
  }

  std::uint64_t next_u64() {
    return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ull);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1]; never returns zero (safe for log()).
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n); n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n) {
    assert(n > 0);
    std::uint64_t x, r;
    do {
      x = next_u64();
      r = x % n;
    } while (x - r > std::uint64_t(0) - n);
    return r;
  }

  /// Two independent standard normals (Box-Muller).
  void normal_pair(double& z0, double& z1) {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double m = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    z0 = m * std::cos(a);
    z1 = m * std::sin(a);
  }

  double normal(double mean = 0.0, double sigma = 1.0) {
    double z0, z1;
    normal_pair(z0, z1);
    return mean + sigma * z0;
  }

  /// Isotropic 3D normal displacement, std `sigma` per axis.
  void normal3(double sigma, double out[3]) {
    double z0, z1, z2, zdrop;
    normal_pair(z0, z1);
    normal_pair(z2, zdrop);
    out[0] = sigma * z0;
    out[1] = sigma * z1;
    out[2] = sigma * z2;
  }

  /// Poisson-distributed count with mean `lambda` (exact inversion by
  /// multiplication, chunked so exp() stays in normal range).
  std::uint64_t poisson(double lambda) {
    assert(lambda >= 0.0);
    std::uint64_t total = 0;
    while (lambda > 0.0) {
      const double chunk = lambda > 500.0 ? 500.0 : lambda;
      lambda -= chunk;
      const double limit = std::exp(-chunk);
      double p = 1.0;
      std::uint64_t k = 0;
      do {
        ++k;
        p *= uniform_pos();
      } while (p > limit);
      total += k - 1;
    }
    return total;
  }

private:
  Rng() = default;

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace simtreels
