#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "pam/common.hpp"

namespace pam {

// Counter-based randomness. Everything below is a pure function of its
// inputs; the construction is documented in docs/randomness.md and pinned
// by test vectors so independent implementations can reproduce fields
// bit-for-bit.

/// SplitMix64 finalizer.
inline u64 mix64(u64 x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

inline constexpr u64 kGolden = 0x9E3779B97F4A7C15ULL;

/// Absorb one word into a running key. The state is finalized before the
/// word is added, so different (state, word) pairs cannot collide through
/// the xor-linearity of the inputs.
inline u64 absorb(u64 h, u64 w) { return mix64(mix64(h + kGolden) + w); }

inline u64 zigzag(i64 v) {
  return (static_cast<u64>(v) << 1) ^ static_cast<u64>(v >> 63);
}

/// Key for a lattice site: chain = absorb(seed ^ tag, d), then each
/// coordinate zigzag-encoded in order.
inline u64 site_key(u64 seed, u64 tag, int d, const Site& z) {
  u64 h = absorb(seed ^ tag, static_cast<u64>(d));
  for (int i = 0; i < d; ++i) h = absorb(h, zigzag(z[static_cast<std::size_t>(i)]));
  return h;
}

/// Counter-based stream: state advances by the golden gamma, outputs are the
/// SplitMix64 finalizer of the state.
struct Stream {
  u64 state;
  explicit Stream(u64 s) : state(s) {}
  u64 next() {
    state += kGolden;
    return mix64(state);
  }
  /// Uniform on (0, 1] with 53-bit resolution; never returns 0.
  double u01() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1p-53; }
  /// Uniform integer in [0, 2^bits).
  u64 bits(int nbits) { return nbits == 0 ? 0 : (next() >> (64 - nbits)); }
  /// Uniform integer in [0, n).
  u64 below(u64 n) {
    // rejection from the top to avoid modulo bias
    u64 threshold = (0 - n) % n;
    for (;;) {
      u64 r = next();
      if (r >= threshold) return r % n;
    }
  }
  double exponential() { return -std::log(u01()); }
  /// Standard normal (polar method).
  double normal() {
    for (;;) {
      double u = 2.0 * u01() - 1.0;
      double v = 2.0 * u01() - 1.0;
      double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
};

/// Poisson by inversion; mean must be modest (loops O(mean)).
inline u64 poisson(Stream& st, double mean) {
  if (mean <= 0.0) return 0;
  double u = st.u01();
  double p = std::exp(-mean);
  double cdf = p;
  u64 k = 0;
  while (u > cdf && k < 100000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

/// Binomial(n, p) by inversion. n may be astronomically large (passed as a
/// double, exact for powers of two); only small np is supported, which is all
/// the band construction needs.
inline int binomial_small(Stream& st, double n, double p) {
  if (p <= 0.0 || n <= 0.0) return 0;
  double u = st.u01();
  double ratio = p / (1.0 - p);
  double prob = std::exp(n * std::log1p(-p));
  double cdf = prob;
  int k = 0;
  while (u > cdf && k < 512) {
    ++k;
    prob *= ratio * (n - (k - 1)) / static_cast<double>(k);
    cdf += prob;
  }
  return k;
}

/// Gamma(shape, 1) via Marsaglia-Tsang, with the shape<1 boost.
inline double gamma_sample(Stream& st, double shape) {
  if (shape < 1.0) {
    double g = gamma_sample(st, shape + 1.0);
    return g * std::pow(st.u01(), 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = st.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = st.u01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

inline double beta_sample(Stream& st, double a, double b) {
  double x = gamma_sample(st, a);
  double y = gamma_sample(st, b);
  return x / (x + y);
}

/// Seed for replica `i` of an experiment.
inline u64 replica_seed(u64 base, u64 i) { return absorb(base ^ 0x5245504CULL, i); }

}  // namespace pam
