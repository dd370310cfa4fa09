#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pam/common.hpp"

namespace pam {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double beta_fn(double a, double b) { return std::exp(log_beta(a, b)); }

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double beta_cf(double x, double a, double b) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta function B~(x, a, b), with the symmetry
/// B~(x,a,b) = 1 - B~(1-x,b,a) applied past the distribution mean so both
/// tails keep uniform relative accuracy.
inline double reg_inc_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("reg_inc_beta: a, b must be positive");
  if (x < 0.0 || x > 1.0) throw std::domain_error("reg_inc_beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::beta_cf(x, a, b) / a;
  }
  double front2 = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(b, a));
  return 1.0 - front2 * detail::beta_cf(1.0 - x, b, a) / b;
}

namespace detail {

// 15-point Gauss-Kronrod nodes/weights on [-1, 1] (abscissa, K-weight),
// with the embedded 7-point Gauss weights for the error estimate.
inline constexpr double kGK15X[15] = {
    -0.9914553711208126, -0.9491079123427585, -0.8648644233597691, -0.7415311855993944,
    -0.5860872354676911, -0.4058451513773972, -0.2077849550078985, 0.0,
    0.2077849550078985,  0.4058451513773972,  0.5860872354676911,  0.7415311855993944,
    0.8648644233597691,  0.9491079123427585,  0.9914553711208126};
inline constexpr double kGK15W[15] = {
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502, 0.1406532597155259,
    0.1690047266392679, 0.1903505780647854, 0.2044329400752989, 0.2094821410847278,
    0.2044329400752989, 0.1903505780647854, 0.1690047266392679, 0.1406532597155259,
    0.1047900103222502, 0.0630920926299786, 0.0229353220105292};
inline constexpr double kG7W[7] = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189, 0.4179591836734694,
    0.3818300505051189, 0.2797053914892767, 0.1294849661688697};

template <typename F>
void gk15(const F& f, double a, double b, double& result, double& err) {
  double hl = 0.5 * (b - a), mid = 0.5 * (a + b);
  double rk = 0.0, rg = 0.0;
  for (int i = 0; i < 15; ++i) {
    double v = f(mid + hl * kGK15X[i]);
    rk += kGK15W[i] * v;
    if (i % 2 == 1) rg += kG7W[i / 2] * v;
  }
  result = rk * hl;
  err = std::fabs((rk - rg) * hl);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod quadrature to absolute tolerance `abs_tol`.
template <typename F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-10, int max_depth = 48) {
  struct Seg {
    double a, b, val, err;
    int depth;
  };
  double v0, e0;
  detail::gk15(f, a, b, v0, e0);
  std::vector<Seg> stack{{a, b, v0, e0, 0}};
  double total = 0.0;
  while (!stack.empty()) {
    Seg s = stack.back();
    stack.pop_back();
    if (s.err <= abs_tol * std::max(1.0, std::fabs(s.b - s.a) / std::fabs(b - a)) * 0.5 ||
        s.depth >= max_depth) {
      total += s.val;
      continue;
    }
    double m = 0.5 * (s.a + s.b);
    double vl, el, vr, er;
    detail::gk15(f, s.a, m, vl, el);
    detail::gk15(f, m, s.b, vr, er);
    stack.push_back({s.a, m, vl, el, s.depth + 1});
    stack.push_back({m, s.b, vr, er, s.depth + 1});
  }
  return total;
}

/// Kolmogorov distribution tail: Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 128; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-18) break;
  }
  return std::min(1.0, std::max(0.0, 2.0 * sum));
}

/// lambda such that Q(lambda) = p (e.g. 1.3581 for p = 0.05).
inline double kolmogorov_quantile(double p) {
  double lo = 0.1, hi = 4.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (kolmogorov_tail(mid) > p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace pam
