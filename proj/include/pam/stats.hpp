#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pam/common.hpp"
#include "pam/special.hpp"

namespace pam {

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr m;
  m.n = xs.size();
  if (m.n == 0) return m;
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / static_cast<double>(m.n);
  double v = 0.0;
  for (double x : xs) v += (x - m.mean) * (x - m.mean);
  if (m.n > 1) m.stderr_ = std::sqrt(v / static_cast<double>(m.n - 1) / static_cast<double>(m.n));
  return m;
}

inline MeanStderr binomial_estimate(std::size_t hits, std::size_t n) {
  MeanStderr m;
  m.n = n;
  if (n == 0) return m;
  m.mean = static_cast<double>(hits) / static_cast<double>(n);
  m.stderr_ = std::sqrt(std::max(m.mean * (1.0 - m.mean), 1e-12) / static_cast<double>(n));
  return m;
}

/// One-sample KS distance against a cdf, optionally ignoring samples beyond
/// `cap` (censored tail; the sup is then over [0, cap] only).
inline double ks_distance(std::vector<double> xs, const std::function<double(double)>& cdf,
                          double cap = std::numeric_limits<double>::infinity()) {
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (xs[i] > cap) break;
    double f = cdf(xs[i]);
    double lo = static_cast<double>(i) / static_cast<double>(n);
    double hi = static_cast<double>(i + 1) / static_cast<double>(n);
    d = std::max(d, std::max(std::fabs(f - lo), std::fabs(hi - f)));
  }
  return d;
}

/// Two-sample KS distance.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    double fa = static_cast<double>(i) / static_cast<double>(a.size());
    double fb = static_cast<double>(j) / static_cast<double>(b.size());
    d = std::max(d, std::fabs(fa - fb));
  }
  return d;
}

/// Critical KS distance at level `alpha` for a one-sample test of size n.
inline double ks_critical(std::size_t n, double alpha) {
  return kolmogorov_quantile(alpha) / std::sqrt(static_cast<double>(n));
}

/// Critical distance for a two-sample test.
inline double ks_critical_two(std::size_t n, std::size_t m, double alpha) {
  double eff = static_cast<double>(n) * static_cast<double>(m) /
               static_cast<double>(n + m);
  return kolmogorov_quantile(alpha) / std::sqrt(eff);
}

/// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::size_t n = std::min(x.size(), y.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return den > 0.0 ? num / den : 0.0;
}

inline bool strictly_decreasing(const std::vector<double>& xs) {
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] < xs[i - 1])) return false;
  return true;
}

}  // namespace pam
