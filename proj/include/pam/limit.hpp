#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pam/common.hpp"
#include "pam/model.hpp"
#include "pam/rng.hpp"
#include "pam/special.hpp"

namespace pam {

/// A point of the limiting Poisson pattern, kept in both (x, y) and
/// (x, w = y + q|x|) coordinates.
struct LimitPoint {
  std::array<double, kMaxDim> x{};
  double absx = 0.0;
  double y = 0.0;
  double w = 0.0;
};

/// Sampling window. Points kept satisfy y + kappa|x| >= u_min and |x| <= L.
/// Two exactly-sampleable shapes:
///  * kappa == q, L finite: rectangle in (x, w); the w-marginal is Pareto.
///  * kappa < q, L infinite: sloped window; the radial marginal is a Beta
///    transform and the vertical one a shifted Pareto.
struct LimitWindow {
  double kappa = 0.0;
  double u_min = 1.0;
  double L = std::numeric_limits<double>::infinity();
};

struct PointPattern {
  ModelParams params;
  LimitWindow window;
  u64 seed = 0;
  int stages = 1;  // nested enlargements already applied
  std::vector<LimitPoint> points;
};

/// Closed-form mass of the no-change region:
/// nu(D_theta(r, y)) = theta_const * y^{d-alpha} / phi_theta(y / (y + q r)).
inline double nu_region_mass(const ModelParams& p, double theta, double r, double y) {
  if (!(y > 0.0)) throw std::domain_error("nu_region_mass: y must be positive");
  if (theta < 0.0 || r < 0.0) throw std::domain_error("nu_region_mass: theta, r must be >= 0");
  double v = y / (y + p.q * r);
  return p.theta_const * std::pow(y, p.d - p.alpha) / phi_weight(p, theta, v);
}

/// nu-mass of a sampling window.
inline double window_mass(const ModelParams& p, const LimitWindow& w) {
  if (!(w.u_min > 0.0)) throw std::domain_error("window_mass: u_min must be positive");
  if (std::isfinite(w.L)) {
    if (w.kappa != p.q) throw std::domain_error("window_mass: finite L requires kappa = q");
    double fact = 1.0;
    for (int i = 2; i <= p.d; ++i) fact *= i;
    double vol = std::exp2(p.d) * std::pow(w.L, p.d) / fact;
    return vol * std::pow(w.u_min, -p.alpha);
  }
  if (!(w.kappa < p.q)) throw std::domain_error("window_mass: infinite L requires kappa < q");
  double fact = 1.0;
  for (int i = 2; i < p.d; ++i) fact *= i;
  double tk = std::exp2(p.d) * beta_fn(p.alpha - p.d, p.d) /
              (std::pow(p.q - w.kappa, p.d) * fact);
  return tk * std::pow(w.u_min, p.d - p.alpha);
}

namespace detail {

// uniform direction on the l1 sphere (coordinates of modulus summing to 1)
inline void l1_direction(Stream& st, int d, std::array<double, kMaxDim>& x) {
  x.fill(0.0);
  if (d == 1) {
    x[0] = (st.next() & 1) ? 1.0 : -1.0;
    return;
  }
  std::array<double, kMaxDim> cuts{};
  for (int i = 0; i < d - 1; ++i) cuts[static_cast<std::size_t>(i)] = st.u01();
  std::sort(cuts.begin(), cuts.begin() + (d - 1));
  double prev = 0.0;
  for (int i = 0; i < d; ++i) {
    double hi = (i == d - 1) ? 1.0 : cuts[static_cast<std::size_t>(i)];
    double len = hi - prev;
    prev = hi;
    double sign = (st.next() & 1) ? 1.0 : -1.0;
    x[static_cast<std::size_t>(i)] = sign * len;
  }
}

inline LimitPoint finish_point(const ModelParams& p, std::array<double, kMaxDim> dir, double rho,
                               double w_coord, double kappa) {
  LimitPoint pt;
  for (int i = 0; i < p.d; ++i) pt.x[static_cast<std::size_t>(i)] = dir[static_cast<std::size_t>(i)] * rho;
  pt.absx = rho;
  double u = w_coord;                    // u = y + kappa |x|
  pt.y = u - kappa * rho;
  pt.w = pt.y + p.q * rho;
  return pt;
}

// one sample from a sloped window, conditioned (by rejection) on
// y + kappa|x| < u_cap when u_cap is finite
inline LimitPoint sample_sloped(Stream& st, const ModelParams& p, const LimitWindow& w,
                                double u_cap = std::numeric_limits<double>::infinity()) {
  double b = p.q - w.kappa;
  for (;;) {
    double v = beta_sample(st, p.alpha - p.d, p.d);
    double rho = w.u_min * (1.0 - v) / (b * v);
    double u = (w.u_min + b * rho) * std::pow(st.u01(), -1.0 / p.alpha) - b * rho;
    if (u >= u_cap) continue;
    std::array<double, kMaxDim> dir{};
    l1_direction(st, p.d, dir);
    return finish_point(p, dir, rho, u, w.kappa);
  }
}

inline LimitPoint sample_rect(Stream& st, const ModelParams& p, const LimitWindow& w) {
  std::array<double, kMaxDim> dir{};
  l1_direction(st, p.d, dir);
  double rho = w.L * std::pow(st.u01(), 1.0 / p.d);
  double wv = w.u_min * std::pow(st.u01(), -1.0 / p.alpha);
  // rectangle windows live in (x, w): the kept coordinate is w itself
  LimitPoint pt;
  for (int i = 0; i < p.d; ++i) pt.x[static_cast<std::size_t>(i)] = dir[static_cast<std::size_t>(i)] * rho;
  pt.absx = rho;
  pt.w = wv;
  pt.y = wv - p.q * rho;
  return pt;
}

}  // namespace detail

/// Sample a Poisson pattern on the window. Deterministic in (params, window,
/// seed).
inline PointPattern sample_pattern(const ModelParams& p, const LimitWindow& w, u64 seed) {
  PointPattern pat{p, w, seed, 1, {}};
  double mass = window_mass(p, w);
  Stream st(absorb(seed ^ 0x504F4953ULL, 0));
  u64 n = poisson(st, mass);
  pat.points.reserve(n);
  for (u64 i = 0; i < n; ++i) {
    pat.points.push_back(std::isfinite(w.L) ? detail::sample_rect(st, p, w)
                                            : detail::sample_sloped(st, p, w));
  }
  return pat;
}

/// Enlarge a pattern by one nested shell (halve u_min; double a finite L),
/// sampling only the increment region so existing points are preserved.
inline void extend_pattern(PointPattern& pat) {
  const ModelParams& p = pat.params;
  LimitWindow next = pat.window;
  next.u_min *= 0.5;
  Stream st(absorb(pat.seed ^ 0x504F4953ULL, static_cast<u64>(pat.stages)));
  if (std::isfinite(pat.window.L)) {
    next.L *= 2.0;
    // shell (a): L < |x| <= 2L, w >= u_min/2
    LimitWindow outer = next;
    double mass_a = window_mass(p, outer) * (1.0 - std::exp2(-p.d));
    u64 na = poisson(st, mass_a);
    for (u64 i = 0; i < na; ++i) {
      LimitPoint pt;
      do {
        pt = detail::sample_rect(st, p, outer);
      } while (pt.absx <= pat.window.L);
      pat.points.push_back(pt);
    }
    // shell (b): |x| <= L, u_min/2 <= w < u_min
    double fact = 1.0;
    for (int i = 2; i <= p.d; ++i) fact *= i;
    double vol = std::exp2(p.d) * std::pow(pat.window.L, p.d) / fact;
    double mass_b = vol * (std::pow(next.u_min, -p.alpha) - std::pow(pat.window.u_min, -p.alpha));
    u64 nb = poisson(st, mass_b);
    double lo_pow = std::pow(next.u_min, -p.alpha), hi_pow = std::pow(pat.window.u_min, -p.alpha);
    for (u64 i = 0; i < nb; ++i) {
      std::array<double, kMaxDim> dir{};
      detail::l1_direction(st, p.d, dir);
      double rho = pat.window.L * std::pow(st.u01(), 1.0 / p.d);
      double wv = std::pow(lo_pow - st.u01() * (lo_pow - hi_pow), -1.0 / p.alpha);
      LimitPoint pt;
      for (int j = 0; j < p.d; ++j) pt.x[static_cast<std::size_t>(j)] = dir[static_cast<std::size_t>(j)] * rho;
      pt.absx = rho;
      pt.w = wv;
      pt.y = wv - p.q * rho;
      pat.points.push_back(pt);
    }
  } else {
    // sloped shell: u_min/2 <= y + kappa|x| < u_min
    double dmass = window_mass(p, next) - window_mass(p, pat.window);
    u64 n = poisson(st, dmass);
    for (u64 i = 0; i < n; ++i)
      pat.points.push_back(detail::sample_sloped(st, p, next, pat.window.u_min));
  }
  pat.window = next;
  ++pat.stages;
}

/// Cone score at parameter t: s_t(x, y) = y + q (1 - 1/t) |x| = w - (q/t)|x|.
inline double cone_score(const ModelParams& p, const LimitPoint& pt, double t) {
  return pt.w - (p.q / t) * pt.absx;
}

/// Index of the score maximizer at parameter t; ties go to the larger |x|.
inline std::size_t cone_argmax(const ModelParams& p, const PointPattern& pat, double t) {
  if (!(t > 0.0)) throw std::domain_error("cone_argmax: t must be positive");
  if (pat.points.empty()) throw std::domain_error("cone_argmax: empty pattern");
  std::size_t best = 0;
  double best_s = cone_score(p, pat.points[0], t);
  for (std::size_t i = 1; i < pat.points.size(); ++i) {
    double s = cone_score(p, pat.points[i], t);
    if (s > best_s || (s == best_s && pat.points[i].absx > pat.points[best].absx)) {
      best = i;
      best_s = s;
    }
  }
  return best;
}

struct ConeSegment {
  double t_start, t_end;
  std::size_t point;
};

struct ConePath {
  double t_lo, t_hi;
  std::vector<ConeSegment> segments;
};

/// Piecewise-constant maximizer path on [t_lo, t_hi], built by the event
/// sweep: the leader at t can only lose to points with larger |x| and larger
/// w, at parameter q(|x'|-|x|)/(w'-w).
inline ConePath cone_path(const ModelParams& p, const PointPattern& pat, double t_lo, double t_hi) {
  if (!(t_lo > 0.0) || !(t_hi >= t_lo)) throw std::domain_error("cone_path: bad range");
  ConePath path{t_lo, t_hi, {}};
  std::size_t cur = cone_argmax(p, pat, t_lo);
  double t = t_lo;
  while (true) {
    double best_t = std::numeric_limits<double>::infinity();
    std::size_t best_i = cur;
    for (std::size_t i = 0; i < pat.points.size(); ++i) {
      const LimitPoint& c = pat.points[i];
      const LimitPoint& L = pat.points[cur];
      if (!(c.absx > L.absx) || !(c.w > L.w)) continue;
      double tc = p.q * (c.absx - L.absx) / (c.w - L.w);
      if (tc <= t || tc > t_hi) continue;
      if (tc < best_t || (tc == best_t && c.absx > pat.points[best_i].absx)) {
        best_t = tc;
        best_i = i;
      }
    }
    if (best_i == cur || !std::isfinite(best_t)) {
      path.segments.push_back({t, t_hi, cur});
      break;
    }
    path.segments.push_back({t, best_t, cur});
    cur = best_i;
    t = best_t;
  }
  return path;
}

/// Tip height along a path (the y-intercept of the touching cone).
inline double tip_value(const ModelParams& p, const PointPattern& pat, const ConePath& path,
                        double t) {
  for (const auto& seg : path.segments) {
    if (t >= seg.t_start && t <= seg.t_end) return cone_score(p, pat.points[seg.point], t);
  }
  throw std::domain_error("tip_value: t outside path range");
}

/// nu-mass of the points excluded by the window that could still beat a
/// realized minimal tip value s_star somewhere in [t_lo, t_hi]. Zero for a
/// sloped window with kappa >= q(1 - 1/t_hi) and u_min <= s_star.
inline double truncation_bound(const ModelParams& p, const LimitWindow& w, double s_star,
                               double t_lo, double t_hi) {
  (void)t_lo;
  if (!(s_star > 0.0)) throw std::domain_error("truncation_bound: tip must be positive");
  double coef = std::exp2(p.d);
  for (int i = 2; i < p.d; ++i) coef /= i;
  double slope = p.q / t_hi;  // shallowest cone boundary in the range
  if (std::isfinite(w.L)) {
    // (i) |x| > L, w above the cone boundary
    auto f_out = [&](double rho) {
      return coef * std::pow(rho, p.d - 1) * std::pow(s_star + slope * rho, -p.alpha);
    };
    double hi = w.L;
    double tail = 0.0;
    // integrate to infinity by doubling panels until the remainder vanishes
    for (int k = 0; k < 64; ++k) {
      double next = hi * 2.0 + 1.0;
      double part = integrate(f_out, hi, next, 1e-14);
      tail += part;
      hi = next;
      if (part < 1e-16) break;
    }
    // (ii) |x| <= L, w below u_min but above the cone boundary
    double inner = 0.0;
    if (w.u_min > s_star) {
      double rho_max = std::min(w.L, (w.u_min - s_star) / slope);
      auto f_in = [&](double rho) {
        double lo_b = std::pow(s_star + slope * rho, -p.alpha);
        double hi_b = std::pow(w.u_min, -p.alpha);
        return coef * std::pow(rho, p.d - 1) * std::max(0.0, lo_b - hi_b);
      };
      inner = integrate(f_in, 0.0, rho_max, 1e-14);
    }
    return tail + inner;
  }
  double b = p.q - w.kappa;
  if (slope <= b) {
    // window shallower than the cone: the excluded region has infinite reach
    return std::numeric_limits<double>::infinity();
  }
  if (w.u_min <= s_star) return 0.0;
  double rho_max = (w.u_min - s_star) / (slope - b);
  auto f = [&](double rho) {
    double lo_b = std::pow(s_star + slope * rho, -p.alpha);
    double hi_b = std::pow(w.u_min + b * rho, -p.alpha);
    return coef * std::pow(rho, p.d - 1) * std::max(0.0, lo_b - hi_b);
  };
  return integrate(f, 0.0, rho_max, 1e-14);
}

/// Sloped-window pattern grown until no excluded point can influence the
/// maximizer anywhere in [t_lo, t_hi] (truncation bound exactly zero).
inline PointPattern sample_cone_pattern(const ModelParams& p, double t_lo, double t_hi, u64 seed,
                                        double u_start = 1.0) {
  LimitWindow w;
  w.kappa = p.q * (1.0 - 0.5 / std::max(t_hi, 1.0));  // above q(1-1/t) for all t <= t_hi
  w.u_min = u_start;
  PointPattern pat = sample_pattern(p, w, seed);
  for (int guard = 0; guard < 200; ++guard) {
    if (!pat.points.empty()) {
      double s_star = cone_score(p, pat.points[cone_argmax(p, pat, t_lo)], t_lo);
      if (pat.window.u_min <= s_star) break;
    }
    extend_pattern(pat);
  }
  return pat;
}

}  // namespace pam
