#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pam/common.hpp"
#include "pam/model.hpp"
#include "pam/potential.hpp"

namespace pam {

struct SolverConfig {
  double dt_factor = 0.02;         // dt = dt_factor / (xi_max + 4d); 1.0 is the stability bound
  double first_step_factor = 1e-3; // opening step resolves the point-mass transient
  double leak_tol = 1e-10;         // cumulative boundary leak that triggers box growth
  i64 initial_radius = 4;
  double max_sites = 2e6;          // resource guard on box size
  bool allow_growth = true;
  bool keep_snapshots = false;     // store profiles at observer times (for bisection re-solves)
};

struct SolveRecord {
  double t = 0.0;
  Site x{};          // profile peak
  double v_peak = 0.0;
  double log_mass = 0.0;
  double leak = 0.0; // cumulative boundary leak estimate
};

/// Normalized-flow integrator for the lattice heat equation with potential:
/// evolves the profile v = u / U and log U separately, so the
/// superexponential total mass never touches floating-point range. The flow
/// is dv/dt = \Delta v + xi v - lambda(t) v with lambda = sum(xi v), and
/// d(log U)/dt = lambda, integrated with classical RK4 on a Dirichlet box
/// that grows when the boundary-leak monitor trips.
class LatticeSolver {
 public:
  LatticeSolver(const PotentialField& field, SolverConfig cfg = {})
      : field_(field), p_(field.params()), cfg_(cfg) {
    reset();
  }

  void reset() {
    t_ = 0.0;
    log_mass_ = 0.0;
    leak_ = 0.0;
    leak_since_growth_ = 0.0;
    clamp_count_ = 0;
    max_renorm_drift_ = 0.0;
    build_box(cfg_.initial_radius);
    std::fill(v_.begin(), v_.end(), 0.0);
    v_[static_cast<std::size_t>(origin_)] = 1.0;  // point mass at the origin
  }

  double t() const { return t_; }
  double log_mass() const { return log_mass_; }
  double leak() const { return leak_; }
  i64 box_radius() const { return radius_; }
  i64 clamp_count() const { return clamp_count_; }
  double max_renorm_drift() const { return max_renorm_drift_; }
  const std::vector<double>& profile() const { return v_; }
  double mass_error() const {
    double s = 0.0;
    for (double x : v_) s += x;
    return s - 1.0;
  }

  double stability_dt() const { return 1.0 / (xi_max_ + 4.0 * p_.d); }

  /// One explicit RK4 step of the normalized flow. Throws if dt exceeds the
  /// stability bound.
  void step(double dt) {
    if (dt > stability_dt())
      throw stability_error("solver step: dt exceeds 1/(xi_max + 4d)");
    rhs(v_, k1_, &lam1_, &out1_);
    stage(v_, k1_, 0.5 * dt, tmp_);
    rhs(tmp_, k2_, &lam2_, &out2_);
    stage(v_, k2_, 0.5 * dt, tmp_);
    rhs(tmp_, k3_, &lam3_, &out3_);
    stage(v_, k3_, dt, tmp_);
    rhs(tmp_, k4_, &lam4_, &out4_);
    for (std::size_t i = 0; i < v_.size(); ++i) {
      v_[i] += dt / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
      if (v_[i] < 0.0) {
        v_[i] = 0.0;
        ++clamp_count_;
      }
    }
    log_mass_ += dt / 6.0 * (lam1_ + 2.0 * lam2_ + 2.0 * lam3_ + lam4_);
    double bleak = dt / 6.0 * (out1_ + 2.0 * out2_ + 2.0 * out3_ + out4_);
    leak_ += bleak;
    leak_since_growth_ += bleak;
    // the flow conserves sum(v) exactly; renormalization only absorbs the
    // integrator truncation error
    double s = 0.0;
    for (double x : v_) s += x;
    max_renorm_drift_ = std::max(max_renorm_drift_, std::fabs(s - 1.0));
    double inv = 1.0 / s;
    for (double& x : v_) x *= inv;
    t_ += dt;
    if (cfg_.allow_growth && leak_since_growth_ > cfg_.leak_tol) grow();
  }

  /// Integrate to t_end, recording at each observer time. Observer times
  /// must be increasing; t_end is appended if beyond the last observer.
  std::vector<SolveRecord> solve(double t_end, std::vector<double> observers) {
    if (!(t_end > 0.0)) throw std::domain_error("solve: t_end must be positive");
    if (observers.empty() || observers.back() < t_end) observers.push_back(t_end);
    std::vector<SolveRecord> out;
    for (double tobs : observers) {
      if (tobs > t_end) break;
      run_to(tobs);
      out.push_back(record());
      if (cfg_.keep_snapshots) snapshots_.push_back({t_, v_, log_mass_, radius_});
    }
    return out;
  }

  SolveRecord record() const {
    SolveRecord r;
    r.t = t_;
    r.log_mass = log_mass_;
    r.leak = leak_;
    std::size_t best = static_cast<std::size_t>(origin_);
    for (std::size_t i = 0; i < v_.size(); ++i) {
      if (v_[i] > v_[best]) {
        best = i;
      } else if (v_[i] == v_[best] && i != best) {
        Site a = decode(static_cast<i64>(i)), b = decode(static_cast<i64>(best));
        if (site_beats(a, b, p_.d)) best = i;
      }
    }
    r.x = decode(static_cast<i64>(best));
    r.v_peak = v_[best];
    return r;
  }

  double v_at(const Site& z) const {
    for (int i = 0; i < p_.d; ++i)
      if (std::llabs(z[static_cast<std::size_t>(i)]) > radius_) return 0.0;
    return v_[static_cast<std::size_t>(encode(z))];
  }

  void run_to(double t_stop) {
    bool fresh = (t_ == 0.0);
    double ramp = fresh ? cfg_.first_step_factor : cfg_.dt_factor;
    while (t_ < t_stop) {
      double dt = std::min(ramp, cfg_.dt_factor) * stability_dt();
      dt = std::min(dt, t_stop - t_);
      step(dt);
      ramp *= 2.0;
    }
  }

  struct Snapshot {
    double t;
    std::vector<double> v;
    double log_mass;
    i64 radius;
  };
  const std::vector<Snapshot>& snapshots() const { return snapshots_; }

  /// Replace the integrator state by a stored snapshot (box radius must
  /// match the configured initial radius).
  void load(const Snapshot& s) {
    if (s.radius != radius_) build_box(s.radius);
    v_ = s.v;
    t_ = s.t;
    log_mass_ = s.log_mass;
  }

  struct ResidualX {
    double value = 0.0;
    bool censored = false;
    double switch_time = 0.0;
  };

  Site decode(i64 idx) const {
    Site z{};
    i64 side = 2 * radius_ + 1;
    for (int i = p_.d - 1; i >= 0; --i) {
      z[static_cast<std::size_t>(i)] = idx % side - radius_;
      idx /= side;
    }
    return z;
  }

  i64 encode(const Site& z) const {
    i64 side = 2 * radius_ + 1;
    i64 idx = 0;
    for (int i = 0; i < p_.d; ++i) idx = idx * side + (z[static_cast<std::size_t>(i)] + radius_);
    return idx;
  }

 private:
  const PotentialField& field_;
  ModelParams p_;
  SolverConfig cfg_;
  double t_ = 0.0, log_mass_ = 0.0, leak_ = 0.0, leak_since_growth_ = 0.0;
  i64 radius_ = 0;
  double xi_max_ = 1.0;
  i64 origin_ = 0;
  std::vector<double> v_, xi_, k1_, k2_, k3_, k4_, tmp_;
  std::vector<unsigned char> edge_mask_;  // bit 2i: at -R face of dim i, bit 2i+1: at +R face
  std::vector<i64> strides_;
  double lam1_ = 0, lam2_ = 0, lam3_ = 0, lam4_ = 0;
  double out1_ = 0, out2_ = 0, out3_ = 0, out4_ = 0;
  i64 clamp_count_ = 0;
  double max_renorm_drift_ = 0.0;
  std::vector<Snapshot> snapshots_;

  void build_box(i64 radius) {
    double sites = std::pow(2.0 * static_cast<double>(radius) + 1.0, p_.d);
    if (sites > cfg_.max_sites) throw resource_error("solver: box exceeds site budget");
    radius_ = radius;
    i64 n = static_cast<i64>(sites + 0.5);
    i64 side = 2 * radius + 1;
    strides_.assign(static_cast<std::size_t>(p_.d), 1);
    for (int i = p_.d - 2; i >= 0; --i)
      strides_[static_cast<std::size_t>(i)] = strides_[static_cast<std::size_t>(i + 1)] * side;
    xi_.assign(static_cast<std::size_t>(n), 1.0);
    edge_mask_.assign(static_cast<std::size_t>(n), 0);
    xi_max_ = 1.0;
    field_.dense_scan(static_cast<i64>(p_.d) * radius, [&](const Site& z, double xv, i64) {
      for (int i = 0; i < p_.d; ++i)
        if (std::llabs(z[static_cast<std::size_t>(i)]) > radius) return;
      xi_[static_cast<std::size_t>(encode(z))] = xv;
    });
    for (double x : xi_) xi_max_ = std::max(xi_max_, x);
    for (i64 idx = 0; idx < n; ++idx) {
      Site z = decode(idx);
      unsigned char m = 0;
      for (int i = 0; i < p_.d; ++i) {
        if (z[static_cast<std::size_t>(i)] == -radius) m |= static_cast<unsigned char>(1 << (2 * i));
        if (z[static_cast<std::size_t>(i)] == radius) m |= static_cast<unsigned char>(1 << (2 * i + 1));
      }
      edge_mask_[static_cast<std::size_t>(idx)] = m;
    }
    origin_ = encode(Site{});
    k1_.assign(static_cast<std::size_t>(n), 0.0);
    k2_ = k3_ = k4_ = tmp_ = k1_;
    if (v_.empty()) v_ = k1_;
  }

  void grow() {
    i64 new_radius = radius_ + std::max<i64>(4, radius_ / 2);
    double sites = std::pow(2.0 * static_cast<double>(new_radius) + 1.0, p_.d);
    if (sites > cfg_.max_sites) {
      // keep integrating on the capped box; the leak stays observable
      leak_since_growth_ = 0.0;
      return;
    }
    std::vector<double> old_v = std::move(v_);
    i64 old_radius = radius_;
    auto old_decode = [&](i64 idx) {
      Site z{};
      i64 side = 2 * old_radius + 1;
      for (int i = p_.d - 1; i >= 0; --i) {
        z[static_cast<std::size_t>(i)] = idx % side - old_radius;
        idx /= side;
      }
      return z;
    };
    build_box(new_radius);
    v_.assign(xi_.size(), 0.0);
    for (i64 idx = 0; idx < static_cast<i64>(old_v.size()); ++idx) {
      v_[static_cast<std::size_t>(encode(old_decode(idx)))] = old_v[static_cast<std::size_t>(idx)];
    }
    leak_since_growth_ = 0.0;
  }

  // w = Delta v + xi v - lambda_eff v with lambda_eff = sum(xi v) minus the
  // Dirichlet outflow, so that sum(w) = 0 exactly and d(log U)/dt of the
  // truncated system is lambda_eff. Fixed index order keeps the reductions
  // schedule-independent.
  void rhs(const std::vector<double>& v, std::vector<double>& w, double* lambda_out,
           double* outflow) {
    double lam = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) lam += xi_[i] * v[i];
    double out = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      unsigned char m = edge_mask_[i];
      if (!m) continue;
      int edges = 0;
      for (int b = 0; b < 2 * p_.d; ++b) edges += (m >> b) & 1;
      out += v[i] * edges;
    }
    double lam_eff = lam - out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double acc = (xi_[i] - lam_eff - 2.0 * p_.d) * v[i];
      unsigned char m = edge_mask_[i];
      for (int dim = 0; dim < p_.d; ++dim) {
        i64 s = strides_[static_cast<std::size_t>(dim)];
        if (!(m & (1 << (2 * dim)))) acc += v[i - static_cast<std::size_t>(s)];
        if (!(m & (1 << (2 * dim + 1)))) acc += v[i + static_cast<std::size_t>(s)];
      }
      w[i] = acc;
    }
    *lambda_out = lam_eff;
    *outflow = out;
  }

  static void stage(const std::vector<double>& v, const std::vector<double>& k, double h,
                    std::vector<double>& out) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] + h * k[i];
  }

};

/// First change of the peak after t, refined to 1e-3 relative accuracy by
/// re-integrating from the snapshot preceding the change.
inline LatticeSolver::ResidualX residual_lifetime_x(const PotentialField& field,
                                                    const SolverConfig& cfg,
                                                    const std::vector<LatticeSolver::Snapshot>& snaps,
                                                    const std::vector<SolveRecord>& series,
                                                    double t) {
  if (series.empty()) throw std::domain_error("residual_lifetime_x: empty series");
  std::size_t k0 = 0;
  while (k0 + 1 < series.size() && series[k0 + 1].t <= t) ++k0;
  if (series[k0].t > t) throw std::domain_error("residual_lifetime_x: t precedes the series");
  Site x0 = series[k0].x;
  std::size_t kc = k0 + 1;
  while (kc < series.size() && series[kc].x == x0) ++kc;
  if (kc == series.size()) return {series.back().t - t, true, 0.0};

  // bisect in (series[kc-1].t, series[kc].t]; restart from the snapshot at kc-1
  double lo = series[kc - 1].t, hi = series[kc].t;
  const auto& snap = snaps.at(kc - 1);
  while (hi - lo > 1e-3 * std::max(1.0, lo)) {
    double mid = 0.5 * (lo + hi);
    SolverConfig c = cfg;
    c.keep_snapshots = false;
    c.allow_growth = false;
    c.initial_radius = snap.radius;
    LatticeSolver probe(field, c);
    probe.load(snap);
    probe.run_to(mid);
    if (probe.record().x == x0)
      lo = mid;
    else
      hi = mid;
  }
  return {0.5 * (lo + hi) - t, false, 0.5 * (lo + hi)};
}

}  // namespace pam
