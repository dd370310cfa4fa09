#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pam/experiments.hpp"
#include "pam/io.hpp"

namespace pam::cli {

namespace fs = std::filesystem;

struct Common {
  int d = 1;
  double alpha = 2.0;
  u64 seed = 1;
  std::string out;
  unsigned jobs = default_jobs();
};

inline fs::path resolve_out(const Common& c, const std::string& command) {
  fs::path root;
  if (!c.out.empty()) {
    root = c.out;
  } else {
    const char* env = std::getenv("PAM_OUT_ROOT");
    root = fs::path(env ? env : "pam-runs") / (command + "-seed" + std::to_string(c.seed));
  }
  fs::create_directories(root);
  return root;
}

inline void echo_config(const fs::path& dir, const std::string& command, const json& flags) {
  json j;
  j["command"] = command;
  j["build"] = build_id();
  j["flags"] = flags;
  write_json(dir / "config.json", j);
}

/// Apply values from a config echo: any flag not given on the command line
/// takes its value from the file.
inline void apply_config_defaults(CLI::App* app, const json& flags) {
  for (auto it = flags.begin(); it != flags.end(); ++it) {
    CLI::Option* opt = app->get_option_no_throw("--" + it.key());
    if (!opt || opt->count() > 0) continue;
    std::string v;
    if (it.value().is_string())
      v = it.value().get<std::string>();
    else
      v = it.value().dump();
    opt->add_result(v);
    opt->run_callback();
  }
}

inline int run(std::vector<std::string> args);

namespace detail {

inline void write_jump_csv(const fs::path& path, const std::vector<JumpRecord>& jumps, int d) {
  CsvWriter csv(path, {"tau", "from_coords", "to_coords", "xi_from", "xi_to", "gap_before"});
  for (const auto& j : jumps) {
    csv.field(j.tau).field(j.from, d).field(j.to, d).field(j.xi_from).field(j.xi_to).field(
        j.gap_before);
    csv.endrow();
  }
}

inline void write_series_csv(const fs::path& path, const std::vector<SolveRecord>& series, int d) {
  CsvWriter csv(path, {"t", "x_coords", "v_peak", "log_mass", "leak"});
  for (const auto& r : series) {
    csv.field(r.t).field(r.x, d).field(r.v_peak).field(r.log_mass).field(r.leak);
    csv.endrow();
  }
}

inline void write_points_csv(const fs::path& path, const PointPattern& pat) {
  std::vector<std::string> head = {"index"};
  for (int i = 0; i < pat.params.d; ++i) head.push_back("x" + std::to_string(i));
  head.push_back("absx");
  head.push_back("y");
  head.push_back("w");
  CsvWriter csv(path, head);
  for (std::size_t i = 0; i < pat.points.size(); ++i) {
    const auto& pt = pat.points[i];
    csv.field(static_cast<i64>(i));
    for (int k = 0; k < pat.params.d; ++k) csv.field(pt.x[static_cast<std::size_t>(k)]);
    csv.field(pt.absx).field(pt.y).field(pt.w);
    csv.endrow();
  }
}

}  // namespace detail

inline int run(std::vector<std::string> args) {
  CLI::App app{"parabolic Anderson model toolkit"};
  app.require_subcommand(1);

  Common c;
  std::string config_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--d", c.d, "lattice dimension");
    sub->add_option("--alpha", c.alpha, "potential tail index (> d)");
    sub->add_option("--seed", c.seed, "base seed");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--jobs", c.jobs, "worker threads");
    sub->add_option("--config", config_path, "JSON config echo to replay");
  };

  // itheta ------------------------------------------------------------------
  double theta = 1.0;
  auto* sc_itheta = app.add_subcommand("itheta", "persistence probability I(theta) by quadrature");
  add_common(sc_itheta);
  sc_itheta->add_option("--theta", theta, "window factor (>= 0)");

  // nu-mass -----------------------------------------------------------------
  double nm_r = 1.0, nm_y = 1.0;
  u64 nm_mc = 0;
  auto* sc_numass = app.add_subcommand("nu-mass", "closed-form intensity mass of the no-change region");
  add_common(sc_numass);
  sc_numass->add_option("--theta", theta, "window factor");
  sc_numass->add_option("--r", nm_r, "radial coordinate");
  sc_numass->add_option("--y", nm_y, "height coordinate (> 0)");
  sc_numass->add_option("--mc", nm_mc, "Monte Carlo cross-check sample count");

  // sample-limit -------------------------------------------------------------
  double sl_umin = 1.0, sl_L = 5.0;
  std::string sl_kind = "rect";
  auto* sc_sample = app.add_subcommand("sample-limit", "sample the limiting point pattern");
  add_common(sc_sample);
  sc_sample->add_option("--kind", sl_kind, "window kind: rect | sloped");
  sc_sample->add_option("--u-min", sl_umin, "window height floor");
  sc_sample->add_option("--L", sl_L, "spatial radius (rect windows)");
  sc_sample->add_option("--theta", theta, "range parameter fixing the sloped window");

  // cone-path ----------------------------------------------------------------
  double cp_tlo = 1.0, cp_thi = 2.0;
  auto* sc_cone = app.add_subcommand("cone-path", "maximizer path of the limit process");
  add_common(sc_cone);
  sc_cone->add_option("--t-lo", cp_tlo, "range start (> 0)");
  sc_cone->add_option("--t-hi", cp_thi, "range end");

  // track ----------------------------------------------------------------—
  double tr_t0 = 2.0, tr_t1 = 200.0;
  auto* sc_track = app.add_subcommand("track", "event-driven maximizer tracking");
  add_common(sc_track);
  sc_track->add_option("--t0", tr_t0, "start time (> 1)");
  sc_track->add_option("--t1", tr_t1, "end time");

  // solve ---------------------------------------------------------------—
  double sv_tend = 10.0;
  int sv_obs = 50;
  auto* sc_solve = app.add_subcommand("solve", "normalized lattice heat flow");
  add_common(sc_solve);
  sc_solve->add_option("--t-end", sv_tend, "integration end time");
  sc_solve->add_option("--observers", sv_obs, "observer count (geometric grid)");

  // persistence ------------------------------------------------------------
  std::string ps_kind = "z";
  double ps_t = 1e6, ps_eps = 0.1;
  u64 ps_reps = 2000;
  auto* sc_pers = app.add_subcommand("persistence", "no-change probability estimators");
  add_common(sc_pers);
  sc_pers->add_option("--kind", ps_kind, "z (maximizer) | profile (solver) | limit (pattern)");
  sc_pers->add_option("--t", ps_t, "observation time");
  sc_pers->add_option("--theta", theta, "window factor");
  sc_pers->add_option("--eps", ps_eps, "profile tolerance (profile kind)");
  sc_pers->add_option("--reps", ps_reps, "replicas");

  // moderate-dev -------------------------------------------------------------
  double md_t = 1e5;
  u64 md_reps = 5000;
  auto* sc_md = app.add_subcommand("moderate-dev", "growing-window persistence check");
  add_common(sc_md);
  sc_md->add_option("--t", md_t, "observation time");
  sc_md->add_option("--reps", md_reps, "replicas");

  // envelope -----------------------------------------------------------------
  std::string ev_h = "divergent";
  int ev_ngrid = 12;
  u64 ev_law_reps = 0;
  double ev_law_t = 1e6;
  auto* sc_env = app.add_subcommand("envelope", "residual-lifetime envelope diagnostics");
  add_common(sc_env);
  sc_env->add_option("--h-choice", ev_h, "h choice: convergent | divergent");
  sc_env->add_option("--n-grid", ev_ngrid, "grid size (t = e^1 .. e^n)");
  sc_env->add_option("--law-reps", ev_law_reps, "replicas for the ratio-law KS test (0 = skip)");
  sc_env->add_option("--law-t", ev_law_t, "observation time for the ratio-law test");

  // scaling-check ------------------------------------------------------------
  std::vector<double> scl_T = {1e3, 1e4, 1e5, 1e6};
  double scl_probe = 1.0;
  u64 scl_reps = 2000;
  auto* sc_scal = app.add_subcommand("scaling-check", "rescaled maximizer vs limit marginals");
  add_common(sc_scal);
  sc_scal->add_option("--T-list", scl_T, "scale ladder");
  sc_scal->add_option("--t-probe", scl_probe, "probe time");
  sc_scal->add_option("--reps", scl_reps, "replicas per scale");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!config_path.empty()) {
      json file = read_json(config_path);
      apply_config_defaults(sub, file.at("flags"));
    }

    ModelParams p(c.d, c.alpha);
    const std::string name = sub->get_name();
    fs::path dir = resolve_out(c, name);
    json flags = {{"d", c.d}, {"alpha", c.alpha}, {"seed", c.seed}, {"jobs", c.jobs}};

    if (sub == sc_itheta) {
      flags["theta"] = theta;
      echo_config(dir, name, flags);
      double v = i_theta(p, theta);
      write_json(dir / "result.json", {{"theta", theta}, {"i_theta", v}});
      std::cout << "i_theta(" << theta << ") = " << fmt17(v) << "\n";
      return 0;
    }

    if (sub == sc_numass) {
      flags["theta"] = theta;
      flags["r"] = nm_r;
      flags["y"] = nm_y;
      flags["mc"] = nm_mc;
      echo_config(dir, name, flags);
      double v = nu_region_mass(p, theta, nm_r, nm_y);
      json res = {{"theta", theta}, {"r", nm_r}, {"y", nm_y}, {"mass", v}};
      if (nm_mc > 0) {
        LimitWindow w;
        w.kappa = (theta > 0.0) ? p.q * theta / (1.0 + theta) : 0.0;
        if (w.kappa >= p.q) w.kappa = 0.0;
        w.u_min = nm_y;
        double wmass = window_mass(p, w);
        Stream st(absorb(c.seed, 0x4D43ULL));
        u64 in = 0;
        for (u64 i = 0; i < nm_mc; ++i) {
          LimitPoint pt = pam::detail::sample_sloped(st, p, w);
          bool inside = (pt.absx <= nm_r) ? (pt.y > nm_y)
                                          : (pt.y > nm_y - p.q * theta / (1.0 + theta) * (pt.absx - nm_r));
          in += inside ? 1 : 0;
        }
        auto est = binomial_estimate(in, nm_mc);
        res["mc_mass"] = wmass * est.mean;
        res["mc_stderr"] = wmass * est.stderr_;
      }
      write_json(dir / "result.json", res);
      std::cout << "nu(D_theta(r,y)) = " << fmt17(v) << "\n";
      return 0;
    }

    if (sub == sc_sample) {
      flags["kind"] = sl_kind;
      flags["u-min"] = sl_umin;
      flags["L"] = sl_L;
      flags["theta"] = theta;
      echo_config(dir, name, flags);
      LimitWindow w;
      if (sl_kind == "rect") {
        w.kappa = p.q;
        w.L = sl_L;
        w.u_min = sl_umin;
      } else {
        w.kappa = p.q * (1.0 - 0.5 / (1.0 + theta));
        w.u_min = sl_umin;
      }
      PointPattern pat = sample_pattern(p, w, c.seed);
      detail::write_points_csv(dir / "points.csv", pat);
      write_json(dir / "result.json",
                 {{"points", pat.points.size()}, {"mass", window_mass(p, w)}});
      std::cout << "sampled " << pat.points.size() << " points\n";
      return 0;
    }

    if (sub == sc_cone) {
      flags["t-lo"] = cp_tlo;
      flags["t-hi"] = cp_thi;
      echo_config(dir, name, flags);
      PointPattern pat = sample_cone_pattern(p, cp_tlo, cp_thi, c.seed);
      ConePath path = cone_path(p, pat, cp_tlo, cp_thi);
      detail::write_points_csv(dir / "points.csv", pat);
      CsvWriter csv(dir / "segments.csv", {"t_start", "t_end", "point", "absx", "y", "w"});
      for (const auto& s : path.segments) {
        const auto& pt = pat.points[s.point];
        csv.field(s.t_start).field(s.t_end).field(static_cast<i64>(s.point)).field(pt.absx)
            .field(pt.y).field(pt.w);
        csv.endrow();
      }
      write_json(dir / "result.json", {{"segments", path.segments.size()},
                                       {"points", pat.points.size()},
                                       {"truncation_bound", 0.0},
                                       {"window_u_min", pat.window.u_min},
                                       {"window_kappa", pat.window.kappa}});
      std::cout << path.segments.size() << " segments over [" << cp_tlo << ", " << cp_thi << "]\n";
      return 0;
    }

    if (sub == sc_track) {
      flags["t0"] = tr_t0;
      flags["t1"] = tr_t1;
      echo_config(dir, name, flags);
      PotentialField field(p, c.seed);
      Tracker tr(field);
      tr.init(tr_t0);
      tr.advance(tr_t1);
      detail::write_jump_csv(dir / "jumps.csv", tr.jumps(), p.d);
      auto L = tr.leader();
      write_json(dir / "result.json",
                 {{"jumps", tr.jumps().size()},
                  {"leader", site_to_string(L.z, p.d)},
                  {"leader_xi", L.xi},
                  {"leader_phi", L.phi},
                  {"search_radius", tr.search_radius()},
                  {"rescans", tr.rescans()}});
      std::cout << tr.jumps().size() << " jumps; leader " << site_to_string(L.z, p.d) << "\n";
      return 0;
    }

    if (sub == sc_solve) {
      flags["t-end"] = sv_tend;
      flags["observers"] = sv_obs;
      echo_config(dir, name, flags);
      PotentialField field(p, c.seed);
      LatticeSolver solver(field);
      std::vector<double> obs;
      for (int i = 1; i <= sv_obs; ++i)
        obs.push_back(sv_tend * std::pow(static_cast<double>(i) / sv_obs, 2.0));
      auto series = solver.solve(sv_tend, obs);
      detail::write_series_csv(dir / "series.csv", series, p.d);
      write_json(dir / "result.json", {{"records", series.size()},
                                       {"final_log_mass", solver.log_mass()},
                                       {"box_radius", solver.box_radius()},
                                       {"leak", solver.leak()},
                                       {"clamps", solver.clamp_count()}});
      std::cout << "log U(" << sv_tend << ") = " << fmt17(solver.log_mass()) << "\n";
      return 0;
    }

    if (sub == sc_pers) {
      flags["kind"] = ps_kind;
      flags["t"] = ps_t;
      flags["theta"] = theta;
      flags["eps"] = ps_eps;
      flags["reps"] = ps_reps;
      echo_config(dir, name, flags);
      PersistenceResult res;
      if (ps_kind == "z")
        res = estimate_z_persistence(p, ps_t, theta, ps_reps, c.seed, c.jobs);
      else if (ps_kind == "profile")
        res = estimate_profile_persistence(p, ps_t, theta, ps_eps, ps_reps, c.seed, c.jobs);
      else if (ps_kind == "limit")
        res = limit_persistence(p, theta, ps_reps, c.seed, c.jobs);
      else
        throw std::domain_error("persistence: unknown kind");
      double ref = i_theta(p, theta);
      write_json(dir / "result.json", {{"kind", ps_kind},
                                       {"estimate", res.estimate.mean},
                                       {"stderr", res.estimate.stderr_},
                                       {"n", res.estimate.n},
                                       {"resource_errors", res.resource_errors},
                                       {"i_theta", ref}});
      std::cout << ps_kind << "-persistence = " << fmt17(res.estimate.mean) << " +- "
                << fmt17(res.estimate.stderr_) << " (I(theta) = " << fmt17(ref) << ")\n";
      return 0;
    }

    if (sub == sc_md) {
      flags["t"] = md_t;
      flags["reps"] = md_reps;
      echo_config(dir, name, flags);
      auto rep = moderate_deviation_check(p, md_t, md_reps, c.seed, c.jobs);
      write_json(dir / "result.json", rep.to_json());
      std::cout << "theta^d-scaled persistence = " << fmt17(rep.estimates[1].value)
                << " (target " << fmt17(p.i_tail_const) << ")\n";
      return 0;
    }

    if (sub == sc_env) {
      flags["h"] = ev_h;
      flags["n-grid"] = ev_ngrid;
      flags["law-reps"] = ev_law_reps;
      flags["law-t"] = ev_law_t;
      echo_config(dir, name, flags);
      auto rep = envelope_experiment(p, ev_h, ev_ngrid, c.seed);
      if (ev_law_reps > 0) {
        auto rs = residual_law_samples(p, ev_law_t, ev_law_reps, c.seed, c.jobs);
        double cap = 64.0;
        double dist = ks_distance(rs.ratios, [&](double th) { return 1.0 - i_theta(p, th); }, cap);
        rep.extra["law_ks_distance"] = dist;
        rep.extra["law_ks_critical_5pct"] = ks_critical(rs.ratios.size(), 0.05);
        rep.extra["law_censored"] = rs.censored;
        rep.verdicts.push_back({"ratio_law_ks_5pct",
                                dist < ks_critical(rs.ratios.size(), 0.05)});
      }
      write_json(dir / "result.json", rep.to_json());
      std::cout << "envelope " << ev_h << ": " << (rep.all_pass() ? "pass" : "FAIL") << "\n";
      return rep.all_pass() ? 0 : 1;
    }

    if (sub == sc_scal) {
      flags["T-list"] = scl_T;
      flags["t-probe"] = scl_probe;
      flags["reps"] = scl_reps;
      echo_config(dir, name, flags);
      auto rep = scaling_marginal_check(p, scl_T, scl_probe, scl_reps, c.seed, c.jobs);
      write_json(dir / "result.json", rep.to_json());
      std::cout << "scaling-check: " << (rep.all_pass() ? "pass" : "FAIL") << "\n";
      return rep.all_pass() ? 0 : 1;
    }

    return 1;
  } catch (const resource_error& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return 4;
  } catch (const std::domain_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pam::cli
