#pragma once

// Deterministic, stream-splittable random numbers. Each logical stream is an
// mt19937_64 whose 64-bit seed comes from splitmix64 of (master, index), so
// trajectory i always sees the same stream regardless of scheduling. All
// variate generation is by inversion of explicit CDFs (except normals), which
// keeps every sampler a fixed-draw-count function of the uniform stream.

#include <cmath>
#include <cstdint>
#include <random>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace detail {

inline uint64_t splitmix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

class RngStream {
 public:
  RngStream(uint64_t master_seed, uint64_t stream_index)
      : engine_(detail::splitmix64(master_seed + 0x9E3779B97F4A7C15ULL * (stream_index + 1))) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1): safe as a log or quantile argument.
  double uniform_open() {
    double u;
    do {
      u = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    } while (u >= 1.0);
    return u;
  }

  // Box-Muller without caching the second deviate, so the draw count per
  // sample is fixed and streams stay reproducible across refactors.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double exponential(double rate) {
    if (!(rate > 0.0)) throw DomainError("RngStream::exponential: rate must be positive");
    return -std::log(uniform_open()) / rate;
  }

  // Binomial by direct inversion of the CDF (n is small in our use: molecule
  // counts during division events).
  long long binomial(long long n, double p) {
    if (n < 0 || !(p >= 0.0) || !(p <= 1.0))
      throw DomainError("RngStream::binomial: need n >= 0 and p in [0, 1]");
    if (n == 0 || p == 0.0) return 0;
    if (p == 1.0) return n;
    // Recurrence over pmf terms; restart-free single pass. The leading term
    // underflows only for n in the many-thousands, where we halve and recurse
    // (sum of independent binomials over a split population is exact).
    double pmf = std::pow(1.0 - p, static_cast<double>(n));
    if (pmf == 0.0) return binomial(n / 2, p) + binomial(n - n / 2, p);
    const double u = uniform();
    double cdf = pmf;
    long long k = 0;
    while (cdf < u && k < n) {
      pmf *= (static_cast<double>(n - k) / static_cast<double>(k + 1)) * (p / (1.0 - p));
      cdf += pmf;
      ++k;
    }
    return k;
  }

  uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pdmp
