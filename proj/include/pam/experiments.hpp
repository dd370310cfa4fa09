#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pam/common.hpp"
#include "pam/io.hpp"
#include "pam/limit.hpp"
#include "pam/model.hpp"
#include "pam/potential.hpp"
#include "pam/solver.hpp"
#include "pam/special.hpp"
#include "pam/stats.hpp"
#include "pam/tracker.hpp"

namespace pam {

/// Persistence probability of the limit model:
/// I(theta) = (1/B(alpha-d+1, d)) int_0^1 v^{alpha-d} (1-v)^{d-1} phi_theta(v) dv.
inline double i_theta(const ModelParams& p, double theta, double abs_tol = 1e-10) {
  if (theta < 0.0) throw std::domain_error("i_theta: theta must be >= 0");
  double a = p.alpha - p.d, b = static_cast<double>(p.d);
  double norm = 1.0 / beta_fn(a + 1.0, b);
  auto f = [&](double v) {
    if (v <= 0.0 || v > 1.0) return 0.0;
    return std::pow(v, a) * std::pow(1.0 - v, b - 1.0) * phi_weight(p, theta, v);
  };
  return norm * integrate(f, 0.0, 1.0, abs_tol);
}

struct TailConstants {
  double large_theta_const;  // lim theta^d I(theta)
  double c0_const;           // lim (1 - I(theta)) / theta
};

/// Tail constants of I. The large-theta constant is 1/(d B(alpha-d+1, d)).
/// The small-theta slope is the integral of the exact theta-derivative of
/// the weight at theta = 0:
///   d(1/phi)/dtheta|_0 = B~(v)(alpha - (alpha-d)/v)
///                      + (1-v)^d v^{alpha-d-1} / B(alpha-d, d).
inline TailConstants i_tail_constants(const ModelParams& p) {
  double a = p.alpha - p.d, b = static_cast<double>(p.d);
  TailConstants out{};
  out.large_theta_const = p.i_tail_const;
  double inv_beta_ab = 1.0 / beta_fn(a, b);
  auto f = [&](double v) {
    if (v <= 0.0 || v >= 1.0) return 0.0;
    double bt = reg_inc_beta(v, a, b);
    double term = bt * (p.alpha - a / v) + std::pow(1.0 - v, b) * std::pow(v, a - 1.0) * inv_beta_ab;
    return std::pow(v, a) * std::pow(1.0 - v, b - 1.0) * term;
  };
  out.c0_const = integrate(f, 0.0, 1.0, 1e-11) / beta_fn(a + 1.0, b);
  return out;
}

struct Estimate {
  std::string label;
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

struct Reference {
  std::string label;
  double value = 0.0;
  std::string provenance;  // closed_form | quadrature | mc_oracle | frozen_regression
};

struct Verdict {
  std::string label;
  bool pass = false;
};

struct ExperimentReport {
  std::string name;
  json config;
  std::vector<Estimate> estimates;
  std::vector<Reference> references;
  std::vector<Verdict> verdicts;
  std::size_t resource_errors = 0;
  json extra;

  json to_json() const {
    json j;
    j["name"] = name;
    j["build"] = build_id();
    j["config"] = config;
    j["resource_errors"] = resource_errors;
    for (const auto& e : estimates)
      j["estimates"].push_back({{"label", e.label}, {"value", e.value}, {"stderr", e.stderr_}, {"n", e.n}});
    for (const auto& r : references)
      j["references"].push_back({{"label", r.label}, {"value", r.value}, {"provenance", r.provenance}});
    for (const auto& v : verdicts) j["verdicts"].push_back({{"label", v.label}, {"pass", v.pass}});
    if (!extra.is_null()) j["extra"] = extra;
    return j;
  }

  bool all_pass() const {
    for (const auto& v : verdicts)
      if (!v.pass) return false;
    return true;
  }
};

inline json params_json(const ModelParams& p) {
  return {{"d", p.d}, {"alpha", p.alpha}, {"q", p.q}, {"theta_const", p.theta_const},
          {"i_tail_const", p.i_tail_const}};
}

// ---------------------------------------------------------------------------
// maximizer persistence

struct PersistenceResult {
  MeanStderr estimate;
  std::size_t resource_errors = 0;
};

/// Fraction of independent potentials whose maximizer is unchanged over
/// [t, (1+theta) t].
inline PersistenceResult estimate_z_persistence(const ModelParams& p, double t, double theta,
                                                std::size_t n_reps, u64 seed,
                                                unsigned jobs = default_jobs(),
                                                TrackerConfig cfg = {}) {
  if (!(t > 1.0)) throw std::domain_error("estimate_z_persistence: t must exceed 1");
  if (theta < 0.0) throw std::domain_error("estimate_z_persistence: theta must be >= 0");
  if (n_reps < 1) throw std::domain_error("estimate_z_persistence: n_reps must be >= 1");
  std::vector<signed char> hits(n_reps, -1);
  parallel_for(n_reps, jobs, [&](std::size_t i) {
    try {
      PotentialField field(p, replica_seed(seed, i));
      Tracker tr(field, cfg);
      tr.init(t, (1.0 + theta) * t * 1.0000001);
      Site z0 = tr.leader().z;
      tr.advance((1.0 + theta) * t);
      hits[i] = (tr.leader().z == z0) ? 1 : 0;
    } catch (const resource_error&) {
      hits[i] = -1;
    }
  });
  std::size_t ok = 0, hit = 0, fail = 0;
  for (signed char h : hits) {
    if (h < 0)
      ++fail;
    else {
      ++ok;
      hit += static_cast<std::size_t>(h);
    }
  }
  PersistenceResult r;
  r.resource_errors = fail;
  r.estimate = binomial_estimate(hit, ok);
  return r;
}

/// Fraction of solver replicas whose profile stays within eps (sup over
/// sites, observer grid over [t, (1+theta) t]).
inline PersistenceResult estimate_profile_persistence(const ModelParams& p, double t, double theta,
                                                      double eps, std::size_t n_reps, u64 seed,
                                                      unsigned jobs = default_jobs(),
                                                      int window_observers = 32,
                                                      SolverConfig scfg = {}) {
  if (!(eps > 0.0) || !(eps < 0.5))
    throw std::domain_error("estimate_profile_persistence: eps must be in (0, 1/2)");
  if (!(t > 0.0)) throw std::domain_error("estimate_profile_persistence: t must be positive");
  std::vector<signed char> hits(n_reps, -1);
  parallel_for(n_reps, jobs, [&](std::size_t i) {
    try {
      PotentialField field(p, replica_seed(seed, i));
      LatticeSolver solver(field, scfg);
      solver.run_to(t);
      std::vector<double> ref = solver.profile();
      i64 ref_radius = solver.box_radius();
      auto ref_at = [&](const Site& z) -> double {
        for (int k = 0; k < p.d; ++k)
          if (std::llabs(z[static_cast<std::size_t>(k)]) > ref_radius) return 0.0;
        i64 side = 2 * ref_radius + 1, idx = 0;
        for (int k = 0; k < p.d; ++k)
          idx = idx * side + (z[static_cast<std::size_t>(k)] + ref_radius);
        return ref[static_cast<std::size_t>(idx)];
      };
      double sup = 0.0;
      for (int k = 1; k <= window_observers; ++k) {
        double s = t * (1.0 + theta * k / window_observers);
        solver.run_to(s);
        const auto& v = solver.profile();
        for (std::size_t idx = 0; idx < v.size(); ++idx) {
          Site z = solver.decode(static_cast<i64>(idx));
          sup = std::max(sup, std::fabs(v[idx] - ref_at(z)));
        }
        if (sup >= eps) break;
      }
      hits[i] = (sup < eps) ? 1 : 0;
    } catch (const resource_error&) {
      hits[i] = -1;
    }
  });
  std::size_t ok = 0, hit = 0, fail = 0;
  for (signed char h : hits) {
    if (h < 0)
      ++fail;
    else {
      ++ok;
      hit += static_cast<std::size_t>(h);
    }
  }
  PersistenceResult r;
  r.resource_errors = fail;
  r.estimate = binomial_estimate(hit, ok);
  return r;
}

/// theta_t^d * persistence at theta_t = sqrt(log t), against the tail
/// constant of I.
inline ExperimentReport moderate_deviation_check(const ModelParams& p, double t,
                                                 std::size_t n_reps, u64 seed,
                                                 unsigned jobs = default_jobs()) {
  double theta_t = std::sqrt(std::log(t));
  if (!(theta_t >= 2.0))
    throw std::domain_error("moderate_deviation_check: need sqrt(log t) >= 2");
  ExperimentReport rep;
  rep.name = "moderate_deviation_check";
  rep.config = {{"params", params_json(p)}, {"t", t}, {"theta_t", theta_t},
                {"n_reps", n_reps}, {"seed", seed}};
  auto res = estimate_z_persistence(p, t, theta_t, n_reps, seed, jobs);
  rep.resource_errors = res.resource_errors;
  double scaled = std::pow(theta_t, p.d) * res.estimate.mean;
  rep.estimates.push_back({"persistence", res.estimate.mean, res.estimate.stderr_, res.estimate.n});
  rep.estimates.push_back(
      {"theta_d_scaled", scaled, std::pow(theta_t, p.d) * res.estimate.stderr_, res.estimate.n});
  rep.references.push_back({"large_theta_const", p.i_tail_const, "closed_form"});
  double iref = i_theta(p, theta_t);
  rep.references.push_back({"i_theta(theta_t)", iref, "quadrature"});
  rep.verdicts.push_back(
      {"scaled_within_25pct", std::fabs(scaled / p.i_tail_const - 1.0) <= 0.25});
  rep.verdicts.push_back({"consistent_with_i_theta",
                          std::fabs(res.estimate.mean - iref) <= 3.0 * res.estimate.stderr_ + 0.02});
  return rep;
}

// ---------------------------------------------------------------------------
// residual lifetimes

struct ResidualSamples {
  std::vector<double> ratios;  // R^V(t)/t, censored entries excluded
  std::size_t censored = 0;
  std::size_t resource_errors = 0;
};

inline ResidualSamples residual_law_samples(const ModelParams& p, double t, std::size_t n_reps,
                                            u64 seed, unsigned jobs = default_jobs(),
                                            TrackerConfig cfg = {}) {
  std::vector<double> vals(n_reps, -1.0);
  std::vector<signed char> cens(n_reps, 0);
  parallel_for(n_reps, jobs, [&](std::size_t i) {
    try {
      PotentialField field(p, replica_seed(seed, i));
      Tracker tr(field, cfg);
      tr.init(t);
      auto r = tr.residual_lifetime(t);
      vals[i] = r.value / t;
      cens[i] = r.censored ? 1 : 0;
    } catch (const resource_error&) {
      cens[i] = -1;
    }
  });
  ResidualSamples out;
  for (std::size_t i = 0; i < n_reps; ++i) {
    if (cens[i] < 0)
      ++out.resource_errors;
    else if (cens[i] == 1)
      ++out.censored;
    else
      out.ratios.push_back(vals[i]);
  }
  return out;
}

/// Upper-envelope diagnostics for the residual lifetime along t = e^n.
inline ExperimentReport envelope_experiment(const ModelParams& p, const std::string& h_choice,
                                            int n_grid, u64 seed, TrackerConfig cfg = {}) {
  if (n_grid < 10) throw std::domain_error("envelope_experiment: n_grid must be >= 10");
  bool convergent;
  if (h_choice == "convergent")
    convergent = true;
  else if (h_choice == "divergent")
    convergent = false;
  else
    throw std::domain_error("envelope_experiment: h_choice must be convergent|divergent");
  auto h = [&](double t) {
    return convergent ? std::pow(std::log(t), 2.0 / p.d) : 1.0;
  };
  PotentialField field(p, seed);
  Tracker tr(field, cfg);
  tr.init(std::exp(1.0));
  std::vector<double> ratios, running_max;
  std::vector<int> censored;
  double rmax = 0.0;
  for (int n = 1; n <= n_grid; ++n) {
    double t = std::exp(static_cast<double>(n));
    auto r = tr.residual_lifetime(t);
    double ratio = r.value / (t * h(t));
    ratios.push_back(ratio);
    censored.push_back(r.censored ? 1 : 0);
    rmax = std::max(rmax, ratio);
    running_max.push_back(rmax);
  }
  ExperimentReport rep;
  rep.name = "envelope_experiment";
  rep.config = {{"params", params_json(p)}, {"h_choice", h_choice}, {"n_grid", n_grid},
                {"seed", seed}};
  rep.extra = {{"ratios", ratios}, {"running_max", running_max}, {"censored", censored}};
  std::size_t half = ratios.size() / 2;
  auto exceed = [&](std::size_t lo, std::size_t hi, double kappa) {
    std::size_t c = 0;
    for (std::size_t i = lo; i < hi; ++i)
      if (ratios[i] > kappa) ++c;
    return c;
  };
  if (convergent) {
    std::size_t e1 = exceed(0, half, 1.0), e2 = exceed(half, ratios.size(), 1.0);
    double f1 = static_cast<double>(e1) / static_cast<double>(half);
    double f2 = static_cast<double>(e2) / static_cast<double>(ratios.size() - half);
    rep.estimates.push_back({"exceedance_fraction_first_half", f1, 0.0, half});
    rep.estimates.push_back({"exceedance_fraction_second_half", f2, 0.0, ratios.size() - half});
    rep.verdicts.push_back({"exceedance_fraction_nonincreasing", f2 <= f1});
  } else {
    std::size_t c_half = exceed(0, half, 1.0);
    std::size_t c_full = c_half + exceed(half, ratios.size(), 1.0);
    rep.estimates.push_back({"exceedances_first_half", static_cast<double>(c_half), 0.0, half});
    rep.estimates.push_back({"exceedances_total", static_cast<double>(c_full), 0.0, ratios.size()});
    rep.verdicts.push_back({"exceedances_grow", c_full > c_half && c_full >= 1});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// limit-model experiments

/// P{cone maximizer unchanged between parameters 1 and 1+theta} over
/// independent patterns; an exact identity against i_theta.
inline PersistenceResult limit_persistence(const ModelParams& p, double theta,
                                           std::size_t n_patterns, u64 seed,
                                           unsigned jobs = default_jobs()) {
  std::vector<signed char> hits(n_patterns, -1);
  parallel_for(n_patterns, jobs, [&](std::size_t i) {
    PointPattern pat = sample_cone_pattern(p, 1.0, 1.0 + theta, replica_seed(seed, i));
    std::size_t a = cone_argmax(p, pat, 1.0);
    std::size_t b = cone_argmax(p, pat, 1.0 + theta);
    hits[i] = (a == b) ? 1 : 0;
  });
  std::size_t hit = 0;
  for (signed char h : hits) hit += static_cast<std::size_t>(h == 1);
  PersistenceResult r;
  r.estimate = binomial_estimate(hit, n_patterns);
  return r;
}

struct ScalingSamples {
  std::vector<double> absx, second, vertical;  // |Z|/r, phi/a, xi/a (or limit analogues)
  std::size_t resource_errors = 0;
};

/// Lattice marginals (Z_{tT}/r_T, Phi_{tT}(Z)/a_T, xi(Z)/a_T) at probe time t.
inline ScalingSamples lattice_scaling_samples(const ModelParams& p, double T, double t_probe,
                                              std::size_t n_reps, u64 seed,
                                              unsigned jobs = default_jobs(),
                                              TrackerConfig cfg = {}) {
  ScalingSamples out;
  std::vector<double> a(n_reps, -1.0), b(n_reps), c(n_reps);
  parallel_for(n_reps, jobs, [&](std::size_t i) {
    try {
      PotentialField field(p, replica_seed(seed, i));
      Tracker tr(field, cfg);
      tr.init(t_probe * T, t_probe * T * 1.01);
      auto L = tr.leader();
      a[i] = static_cast<double>(l1_norm(L.z, p.d)) / scale_r(p, T);
      b[i] = L.phi / scale_a(p, T);
      c[i] = L.xi / scale_a(p, T);
    } catch (const resource_error&) {
      a[i] = -1.0;
    }
  });
  for (std::size_t i = 0; i < n_reps; ++i) {
    if (a[i] < 0.0) {
      ++out.resource_errors;
      continue;
    }
    out.absx.push_back(a[i]);
    out.second.push_back(b[i]);
    out.vertical.push_back(c[i]);
  }
  return out;
}

/// Limit-process marginals (|Y^1|, tip value, vertical distance) at probe t.
inline ScalingSamples limit_scaling_samples(const ModelParams& p, double t_probe,
                                            std::size_t n_reps, u64 seed,
                                            unsigned jobs = default_jobs()) {
  ScalingSamples out;
  std::vector<double> a(n_reps), b(n_reps), c(n_reps);
  parallel_for(n_reps, jobs, [&](std::size_t i) {
    PointPattern pat = sample_cone_pattern(p, t_probe, t_probe, replica_seed(seed, i));
    const LimitPoint& pt = pat.points[cone_argmax(p, pat, t_probe)];
    a[i] = pt.absx;
    b[i] = cone_score(p, pt, t_probe);  // Y^2 + q(1-1/t)|Y^1|
    c[i] = pt.w;                        // Y^2 + q|Y^1|
  });
  out.absx = std::move(a);
  out.second = std::move(b);
  out.vertical = std::move(c);
  return out;
}

/// KS distances between lattice and limit marginals must shrink along the
/// T-ladder.
inline ExperimentReport scaling_marginal_check(const ModelParams& p, std::vector<double> T_list,
                                               double t_probe, std::size_t n_reps, u64 seed,
                                               unsigned jobs = default_jobs()) {
  ExperimentReport rep;
  rep.name = "scaling_marginal_check";
  rep.config = {{"params", params_json(p)}, {"T_list", T_list}, {"t_probe", t_probe},
                {"n_reps", n_reps}, {"seed", seed}};
  ScalingSamples ref = limit_scaling_samples(p, t_probe, n_reps, absorb(seed, 0xFACEULL), jobs);
  std::vector<double> d_absx, d_second, d_vertical;
  for (std::size_t k = 0; k < T_list.size(); ++k) {
    ScalingSamples lat =
        lattice_scaling_samples(p, T_list[k], t_probe, n_reps, absorb(seed, k), jobs);
    rep.resource_errors += lat.resource_errors;
    d_absx.push_back(ks_two_sample(lat.absx, ref.absx));
    d_second.push_back(ks_two_sample(lat.second, ref.second));
    d_vertical.push_back(ks_two_sample(lat.vertical, ref.vertical));
  }
  rep.extra = {{"ks_absx", d_absx}, {"ks_second", d_second}, {"ks_vertical", d_vertical}};
  rep.verdicts.push_back({"ks_absx_decreasing", strictly_decreasing(d_absx)});
  rep.verdicts.push_back({"ks_second_decreasing", strictly_decreasing(d_second)});
  rep.verdicts.push_back({"ks_vertical_decreasing", strictly_decreasing(d_vertical)});
  return rep;
}

}  // namespace pam
