#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "pam/common.hpp"
#include "pam/model.hpp"
#include "pam/potential.hpp"

namespace pam {

struct TrackerConfig {
  double radius_K = 3.0;        // certified radius multiplier
  double radius_eps = 0.25;     // exponent slack on the log factor
  double horizon_factor = 4.0;  // a scan at time t is certified up to this multiple
  int runner_k = 3;             // runner-up list length
  double brute_budget = 4e6;    // dense-scan ceiling (sites)
  double site_budget = 2.5e7;   // hard ceiling for dense fallbacks
  double beta = 0.0;            // separation exponent; 0 = default 1 + 1/(alpha-d) + 0.1
  double residual_cap_factor = 4096.0;  // censor residual lifetimes past cap*t
};

struct TrackedSite {
  Site z{};
  double xi = 1.0;
  i64 l1 = 0;
  double eta_z = 0.0;
  double gate_t = 0.0;  // |z| / xi: the functional is zero before this time
};

struct JumpRecord {
  double tau = 0.0;
  Site from{}, to{};
  double xi_from = 0.0, xi_to = 0.0;
  double gap_before = 0.0;
  bool activation = false;  // overtake at a gate opening rather than a level crossing
};

struct LeaderView {
  Site z{};
  double xi = 0.0;
  double phi = 0.0;
};

struct ResidualLifetime {
  double value = 0.0;
  bool censored = false;
};

/// Certified search radius for maximizer tracking up to time t.
inline i64 certified_radius(const ModelParams& p, double t, const TrackerConfig& cfg) {
  double h = std::max(t, 2.0);
  double r = cfg.radius_K * scale_r(p, h) *
             std::pow(std::log(h), 1.0 / (p.alpha - p.d) + cfg.radius_eps);
  return std::max<i64>(8, static_cast<i64>(std::ceil(r)));
}

/// Time at which the functional values of two sites cross, if any: between
/// gate openings the difference is A - B/t with A = xi(x)-xi(y) and
/// B = |x| log xi(x) - |y| log xi(y) - eta(x) + eta(y).
inline std::optional<double> crossing_time(const ModelParams& p, const Site& x, double xi_x,
                                           const Site& y, double xi_y) {
  if (x == y) throw std::domain_error("crossing_time: sites must be distinct");
  double A = xi_x - xi_y;
  if (A == 0.0) return std::nullopt;
  double B = static_cast<double>(l1_norm(x, p.d)) * std::log(xi_x) -
             static_cast<double>(l1_norm(y, p.d)) * std::log(xi_y) - eta(x, p.d) + eta(y, p.d);
  double t = B / A;
  if (!(t > 0.0) || !std::isfinite(t)) return std::nullopt;
  return t;
}

/// Both sides of the two growth-rate decompositions, for residual studies:
///  (1) phi_{t(1+theta)}(z)/a_t vs phi_t(z)/a_t + theta/(1+theta) q |z|/r_t
///  (2) xi(z)/a_t              vs phi_t(z)/a_t + q |z|/r_t
struct DecompositionDiagnostics {
  double lhs1, rhs1, err1;
  double lhs2, rhs2, err2;
};

inline DecompositionDiagnostics decomposition_diagnostics(const ModelParams& p, double t,
                                                          double theta, const Site& z,
                                                          double xi_z) {
  i64 l1 = l1_norm(z, p.d);
  if (t * xi_z < static_cast<double>(l1) || (1.0 + theta) * t * xi_z < static_cast<double>(l1))
    throw std::domain_error("decomposition_diagnostics: gate not open");
  double a_t = scale_a(p, t), r_t = scale_r(p, t);
  double eta_z = eta(z, p.d);
  DecompositionDiagnostics out{};
  out.lhs1 = phi_value(t * (1.0 + theta), l1, eta_z, xi_z) / a_t;
  out.rhs1 = phi_value(t, l1, eta_z, xi_z) / a_t +
             theta / (1.0 + theta) * p.q * static_cast<double>(l1) / r_t;
  out.err1 = out.lhs1 - out.rhs1;
  out.lhs2 = xi_z / a_t;
  out.rhs2 = phi_value(t, l1, eta_z, xi_z) / a_t + p.q * static_cast<double>(l1) / r_t;
  out.err2 = out.lhs2 - out.rhs2;
  return out;
}

/// Event-driven tracker of the argmax of the growth functional.
///
/// A scan at time t certifies a horizon: the box radius covers every maximizer
/// up to that time, the leader is the exact argmax (sites with potential below
/// the enumeration threshold are excluded by the bound phi <= xi for xi >= d,
/// and phi <= d(1+log d) otherwise), and the retained set holds every site
/// whose potential exceeds the leader's - the only sites that can ever
/// overtake it, since between gate openings the difference A - B/t tends to
/// A = xi(challenger) - xi(leader). Leader changes are then exact crossing or
/// activation events; past the horizon the box is rescanned.
class Tracker {
 public:
  Tracker(const PotentialField& field, TrackerConfig cfg = {})
      : field_(field), p_(field.params()), cfg_(cfg) {
    if (cfg_.beta <= 0.0) cfg_.beta = 1.0 + 1.0 / (p_.alpha - p_.d) + 0.1;
  }

  /// Initialize at time t; the first scan certifies at least `horizon`
  /// (default horizon_factor * t).
  void init(double t, double horizon = 0.0) {
    if (!(t > 1.0)) throw std::domain_error("Tracker: start time must exceed 1");
    jumps_.clear();
    rescans_ = -1;
    scan(t, horizon);
  }

  double now() const { return t_; }
  double horizon() const { return horizon_; }
  i64 search_radius() const { return radius_; }
  const std::vector<JumpRecord>& jumps() const { return jumps_; }
  int rescans() const { return rescans_; }

  LeaderView leader() const {
    return {leader_.z, leader_.xi, phi_of(leader_, t_)};
  }

  /// Exact top-k of the functional at the current time (entry 0 = leader).
  std::vector<LeaderView> runners(int k) const {
    std::vector<TrackedSite> pool = topk_pool(t_, k);
    std::vector<LeaderView> out;
    for (const auto& e : pool) out.push_back({e.z, e.xi, phi_of(e, t_)});
    std::sort(out.begin(), out.end(), [&](const LeaderView& a, const LeaderView& b) {
      if (a.phi != b.phi) return a.phi > b.phi;
      return site_beats(a.z, b.z, p_.d);
    });
    if (out.size() > static_cast<std::size_t>(k)) out.resize(static_cast<std::size_t>(k));
    return out;
  }

  /// Gap between the two best functional values and the separation threshold
  /// a_t (log t)^{-beta} / 2.
  std::pair<double, double> separation_gap() const {
    auto top = runners(2);
    if (top.size() < 2) throw std::domain_error("separation_gap: runner list too short");
    double gap = top[0].phi - top[1].phi;
    double thr = 0.5 * scale_a(p_, t_) * std::pow(std::log(t_), -cfg_.beta);
    return {gap, thr};
  }

  /// Advance to t_target, returning all jumps in (now, t_target].
  std::vector<JumpRecord> advance(double t_target) {
    if (t_target < t_) throw std::domain_error("advance: target before current time");
    std::size_t first = jumps_.size();
    while (t_ < t_target) {
      double stop = std::min(t_target, horizon_);
      auto ev = next_event(stop);
      if (ev) {
        apply_jump(*ev);
        continue;
      }
      t_ = stop;
      if (t_ < t_target) scan(t_, std::min(t_target, cfg_.horizon_factor * t_));
    }
    return {jumps_.begin() + static_cast<std::ptrdiff_t>(first), jumps_.end()};
  }

  /// Time from t until the next leader change, advancing (and rescanning) as
  /// needed; censored at residual_cap_factor * t.
  ResidualLifetime residual_lifetime(double t) {
    if (t_ < t) advance(t);
    double cap = cfg_.residual_cap_factor * t;
    while (true) {
      for (const auto& j : jumps_)
        if (j.tau > t) return {j.tau - t, false};
      if (t_ >= cap) return {t_ - t, true};
      advance(std::min(cap, cfg_.horizon_factor * t_));
    }
  }

 private:
  const PotentialField& field_;
  ModelParams p_;
  TrackerConfig cfg_;
  double t_ = 0.0, horizon_ = 0.0;
  i64 radius_ = 0;
  TrackedSite leader_{};
  std::vector<TrackedSite> challengers_;  // every retained site has xi > leader xi
  std::vector<JumpRecord> jumps_;
  int rescans_ = -1;

  struct Event {
    double s;
    std::size_t idx;
    bool activation;
  };

  double phi_of(const TrackedSite& s, double t) const {
    return phi_value(t, s.l1, s.eta_z, s.xi);
  }

  TrackedSite make_entry(const Site& z, double xi, i64 l1) const {
    TrackedSite e;
    e.z = z;
    e.xi = xi;
    e.l1 = l1;
    e.eta_z = eta(z, p_.d);
    e.gate_t = static_cast<double>(l1) / xi;
    return e;
  }

  bool beats(const TrackedSite& a, double phi_a, const TrackedSite& b, double phi_b) const {
    if (phi_a != phi_b) return phi_a > phi_b;
    return site_beats(a.z, b.z, p_.d);
  }

  // Exact argmax of the functional at time t over the ball. Uses the
  // threshold descent: unenumerated sites have xi < xi_min, hence a
  // functional value below max(xi_min, d(1+log d)); once the found maximum
  // clears that bound it is certified global.
  TrackedSite find_leader(double t, i64 radius) const {
    double small_floor = p_.d * (1.0 + std::log(static_cast<double>(p_.d)));
    double ball = l1_ball_site_count(p_.d, radius);
    if (ball <= cfg_.brute_budget) return dense_leader(t, radius);
    double xi_min = std::max({scale_a(p_, t) / 8.0, field_.band_cutoff_xi(), small_floor});
    for (;;) {
      TrackedSite best{};
      double best_phi = -1.0;
      field_.enumerate_above(radius, xi_min, cfg_.site_budget,
                             [&](const Site& z, double xi, i64 l1) {
                               double v = phi_value(t, l1, eta(z, p_.d), xi);
                               if (v <= 0.0) return;
                               TrackedSite e{z, xi, l1, 0.0, 0.0};
                               if (best_phi < 0.0 || beats(e, v, best, best_phi)) {
                                 best = e;
                                 best_phi = v;
                               }
                             });
      if (best_phi >= std::max(xi_min, small_floor)) {
        return make_entry(best.z, best.xi, best.l1);
      }
      if (xi_min <= field_.band_cutoff_xi()) {
        if (ball <= cfg_.site_budget) return dense_leader(t, radius);
        throw resource_error("tracker: certified box exceeds the site budget");
      }
      xi_min = std::max(field_.band_cutoff_xi(), xi_min * 0.25);
    }
  }

  TrackedSite dense_leader(double t, i64 radius) const {
    TrackedSite best{};
    double best_phi = -1.0;
    field_.dense_scan(radius, [&](const Site& z, double xi, i64 l1) {
      double v = phi_value(t, l1, eta(z, p_.d), xi);
      if (v <= 0.0) return;
      TrackedSite e{z, xi, l1, 0.0, 0.0};
      if (best_phi < 0.0 || beats(e, v, best, best_phi)) {
        best = e;
        best_phi = v;
      }
    });
    if (!(best_phi > 0.0)) throw resource_error("tracker: no active site in box");
    return make_entry(best.z, best.xi, best.l1);
  }

  // Exact top-k pool at time t (certification: k-th found value clears the
  // enumeration threshold).
  std::vector<TrackedSite> topk_pool(double t, int k) const {
    double small_floor = p_.d * (1.0 + std::log(static_cast<double>(p_.d)));
    double ball = l1_ball_site_count(p_.d, radius_);
    std::vector<TrackedSite> pool;
    auto collect_dense = [&]() {
      pool.clear();
      field_.dense_scan(radius_, [&](const Site& z, double xi, i64 l1) {
        if (phi_value(t, l1, eta(z, p_.d), xi) > 0.0) pool.push_back(make_entry(z, xi, l1));
      });
    };
    if (ball <= cfg_.brute_budget) {
      collect_dense();
      return pool;
    }
    double xi_min = std::max({phi_of(leader_, t) * 0.5, field_.band_cutoff_xi(), small_floor});
    for (;;) {
      pool.clear();
      field_.enumerate_above(radius_, xi_min, cfg_.site_budget,
                             [&](const Site& z, double xi, i64 l1) {
                               if (phi_value(t, l1, eta(z, p_.d), xi) > 0.0)
                                 pool.push_back(make_entry(z, xi, l1));
                             });
      dedupe(pool);
      std::vector<double> vals;
      for (const auto& e : pool) vals.push_back(phi_of(e, t));
      std::sort(vals.begin(), vals.end(), std::greater<double>());
      if (vals.size() >= static_cast<std::size_t>(k) &&
          vals[static_cast<std::size_t>(k - 1)] >= std::max(xi_min, small_floor)) {
        return pool;
      }
      if (xi_min <= field_.band_cutoff_xi()) {
        if (ball <= cfg_.site_budget) {
          collect_dense();
          return pool;
        }
        throw resource_error("tracker: runner query exceeds the site budget");
      }
      xi_min = std::max(field_.band_cutoff_xi(), xi_min * 0.25);
    }
  }

  // de-duplicate by site, keeping the larger potential (coarsest band claim)
  static void dedupe(std::vector<TrackedSite>& v) {
    std::sort(v.begin(), v.end(), [](const TrackedSite& a, const TrackedSite& b) {
      if (a.z != b.z) return a.z < b.z;
      return a.xi > b.xi;
    });
    v.erase(std::unique(v.begin(), v.end(),
                        [](const TrackedSite& a, const TrackedSite& b) { return a.z == b.z; }),
            v.end());
  }

  void scan(double t, double horizon) {
    horizon = std::max(horizon, 1.01 * t);
    radius_ = certified_radius(p_, horizon, cfg_);
    leader_ = find_leader(t, radius_);

    challengers_.clear();
    double ball = l1_ball_site_count(p_.d, radius_);
    if (ball <= cfg_.brute_budget) {
      field_.dense_scan(radius_, [&](const Site& z, double xi, i64 l1) {
        if (xi > leader_.xi) challengers_.push_back(make_entry(z, xi, l1));
      });
    } else {
      field_.enumerate_above(radius_, leader_.xi, cfg_.site_budget,
                             [&](const Site& z, double xi, i64 l1) {
                               if (xi > leader_.xi) challengers_.push_back(make_entry(z, xi, l1));
                             });
      dedupe(challengers_);
    }
    t_ = t;
    horizon_ = horizon;
    ++rescans_;
  }

  // Earliest strict overtake of the leader in (t_, stop], if any. Only sites
  // with strictly larger potential can overtake; the crossing solves
  // A - B/s = 0, clamped to the challenger's gate opening.
  std::optional<Event> next_event(double stop) const {
    std::optional<Event> best;
    for (std::size_t i = 0; i < challengers_.size(); ++i) {
      const TrackedSite& c = challengers_[i];
      if (c.xi <= leader_.xi) continue;
      double A = c.xi - leader_.xi;
      double B = static_cast<double>(c.l1) * std::log(c.xi) -
                 static_cast<double>(leader_.l1) * std::log(leader_.xi) - c.eta_z +
                 leader_.eta_z;
      double s_cross = B / A;
      bool act = c.gate_t > s_cross;
      double s = std::max(s_cross, c.gate_t);
      if (!(s > t_)) {
        // numeric guard: a challenger within rounding of a tie fires
        // immediately after the current time
        s = std::nextafter(t_, stop + 1.0);
        act = false;
      }
      if (s > stop) continue;
      if (!best || s < best->s ||
          (s == best->s && site_beats(c.z, challengers_[best->idx].z, p_.d))) {
        best = Event{s, i, act};
      }
    }
    return best;
  }

  void apply_jump(const Event& ev) {
    const TrackedSite to = challengers_[ev.idx];
    JumpRecord rec;
    rec.tau = ev.s;
    rec.from = leader_.z;
    rec.to = to.z;
    rec.xi_from = leader_.xi;
    rec.xi_to = to.xi;
    rec.activation = ev.activation;
    // second-best value just before the jump: gates opening exactly at the
    // jump instant were still closed, so a genuine crossing records gap 0
    double second = 0.0;
    for (const auto& c : challengers_) {
      if (c.gate_t >= ev.s) continue;
      second = std::max(second, phi_of(c, ev.s));
    }
    rec.gap_before = phi_of(leader_, ev.s) - second;
    jumps_.push_back(rec);
    leader_ = to;
    t_ = ev.s;
    // drop challengers that can no longer overtake
    std::vector<TrackedSite> keep;
    for (auto& c : challengers_)
      if (c.xi > leader_.xi) keep.push_back(c);
    challengers_ = std::move(keep);
  }
};

}  // namespace pam
