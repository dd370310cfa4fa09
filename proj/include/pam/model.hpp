#pragma once

#include <cmath>
#include <stdexcept>

#include "pam/common.hpp"
#include "pam/special.hpp"

namespace pam {

/// Model constants for the heavy-tailed lattice potential. alpha > d is
/// required for the problem to be well posed.
struct ModelParams {
  int d = 1;
  double alpha = 2.0;
  // derived
  double q = 1.0;             // d / (alpha - d)
  double theta_const = 2.0;   // 2^d B(alpha-d, d) / (q^d (d-1)!)
  double i_tail_const = 2.0;  // 1 / (d B(alpha-d+1, d))

  ModelParams() { *this = ModelParams(1, 2.0); }

  ModelParams(int dim, double a) : d(dim), alpha(a) {
    if (d < 1 || d > kMaxDim) throw std::domain_error("ModelParams: d must be in [1,4]");
    if (!(alpha > d)) throw std::domain_error("ModelParams: alpha must exceed d");
    q = d / (alpha - d);
    double fact = 1.0;
    for (int i = 2; i < d; ++i) fact *= i;
    theta_const = std::exp2(d) * beta_fn(alpha - d, d) / (std::pow(q, d) * fact);
    i_tail_const = 1.0 / (d * beta_fn(alpha - d + 1, d));
  }
};

/// Spatial scale (t/log t)^{alpha/(alpha-d)}.
inline double scale_r(const ModelParams& p, double t) {
  if (!(t > 1.0)) throw std::domain_error("scale_r: t must exceed 1");
  return std::pow(t / std::log(t), p.alpha / (p.alpha - p.d));
}

/// Value scale (t/log t)^{d/(alpha-d)}; satisfies r_t = (t/log t) a_t and
/// a_t^alpha = r_t^d.
inline double scale_a(const ModelParams& p, double t) {
  if (!(t > 1.0)) throw std::domain_error("scale_a: t must exceed 1");
  return std::pow(t / std::log(t), p.d / (p.alpha - p.d));
}

/// Log path-count entropy: log(|z|! / prod |z_i|!), via log-gamma so |z| can
/// reach the spatial scale without overflow. 0 <= eta(z) <= |z| log d.
inline double eta(const Site& z, int d) {
  i64 n = l1_norm(z, d);
  if (n == 0) return 0.0;
  double v = std::lgamma(static_cast<double>(n) + 1.0);
  for (int i = 0; i < d; ++i) {
    i64 c = std::llabs(z[static_cast<std::size_t>(i)]);
    if (c > 1) v -= std::lgamma(static_cast<double>(c) + 1.0);
  }
  return v < 0.0 ? 0.0 : v;
}

/// Growth-rate functional: xi - (|z|/t) log xi + eta(z)/t when t*xi >= |z|
/// (boundary included), else exactly 0.
inline double phi_value(double t, i64 l1, double eta_z, double xi) {
  if (!(t > 0.0)) throw std::domain_error("phi: t must be positive");
  if (!(xi >= 1.0)) throw std::domain_error("phi: potential below support");
  if (t * xi < static_cast<double>(l1)) return 0.0;
  if (l1 == 0) return xi;
  return xi - (static_cast<double>(l1) / t) * std::log(xi) + eta_z / t;
}

inline double phi(const ModelParams& p, double t, const Site& z, double xi) {
  return phi_value(t, l1_norm(z, p.d), eta(z, p.d), xi);
}

/// Weight phi_theta(v) from the region calculus:
/// 1/phi_theta(v) = 1 - B~(v,alpha-d,d)
///                + (1+theta)^alpha (theta/v + 1)^{d-alpha} B~((v+theta)/(1+theta), alpha-d, d).
inline double phi_weight(const ModelParams& p, double theta, double v) {
  if (!(v > 0.0) || v > 1.0) throw std::domain_error("phi_weight: v must be in (0,1]");
  if (theta < 0.0) throw std::domain_error("phi_weight: theta must be >= 0");
  double a = p.alpha - p.d, b = static_cast<double>(p.d);
  if (theta == 0.0) return 1.0;
  double head = 1.0 - reg_inc_beta(v, a, b);
  // (1+theta)^alpha (theta/v+1)^{d-alpha} computed in log space: for large
  // theta both factors are huge/tiny and cancel to O(theta^{-d}).
  double lf = p.alpha * std::log1p(theta) - a * std::log1p(theta / v);
  double tail = std::exp(lf) * reg_inc_beta((v + theta) / (1.0 + theta), a, b);
  double inv = head + tail;
  return 1.0 / inv;
}

}  // namespace pam
