#pragma once

// Test-side oracles, kept independent of the library implementation paths
// they check.

#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "pam/common.hpp"
#include "pam/model.hpp"
#include "pam/potential.hpp"

namespace oracle {

using pam::i64;
using pam::Site;

/// Count length-|z| nearest-neighbour paths from 0 to z by direct recursion.
inline double count_min_paths(const Site& z, int d) {
  i64 len = pam::l1_norm(z, d);
  std::map<std::pair<Site, i64>, double> memo;
  std::function<double(const Site&, i64)> rec = [&](const Site& cur, i64 remaining) -> double {
    i64 dist = pam::l1_norm(cur, d);
    if (dist > remaining) return 0.0;
    if (remaining == 0) return dist == 0 ? 1.0 : 0.0;
    auto key = std::make_pair(cur, remaining);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    double total = 0.0;
    for (int i = 0; i < d; ++i) {
      for (int s : {-1, 1}) {
        Site nxt = cur;
        nxt[static_cast<std::size_t>(i)] += s;
        total += rec(nxt, remaining - 1);
      }
    }
    memo[key] = total;
    return total;
  };
  Site origin{};
  // walk from z back to the origin
  return rec(z, len);
}

/// Dense symmetric eigendecomposition by cyclic Jacobi rotations.
inline void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& eigvals,
                         std::vector<double>& vecs) {
  vecs.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) vecs[static_cast<std::size_t>(i) * n + i] = 1.0;
  auto A = [&](int r, int c) -> double& { return a[static_cast<std::size_t>(r) * n + c]; };
  auto V = [&](int r, int c) -> double& { return vecs[static_cast<std::size_t>(r) * n + c]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    if (off < 1e-24 * n * n) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(A(p, q)) < 1e-300) continue;
        double theta = 0.5 * (A(q, q) - A(p, p)) / A(p, q);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double cth = 1.0 / std::sqrt(t * t + 1.0), s = t * cth;
        for (int k = 0; k < n; ++k) {
          double akp = A(k, p), akq = A(k, q);
          A(k, p) = cth * akp - s * akq;
          A(k, q) = s * akp + cth * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = A(p, k), aqk = A(q, k);
          A(p, k) = cth * apk - s * aqk;
          A(q, k) = s * apk + cth * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = cth * vkp - s * vkq;
          V(k, q) = s * vkp + cth * vkq;
        }
      }
    }
  }
  eigvals.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) eigvals[static_cast<std::size_t>(i)] = A(i, i);
}

struct HeatOracle {
  std::vector<double> v;  // normalized profile
  double log_mass;
};

/// u(t) = exp(t (Laplacian + diag(xi))) delta_0 on a Dirichlet box, via the
/// eigendecomposition of the symmetric generator; returns (v, log U).
inline HeatOracle heat_flow(const pam::PotentialField& field, i64 radius, double t) {
  const auto& p = field.params();
  i64 side = 2 * radius + 1;
  int n = 1;
  for (int i = 0; i < p.d; ++i) n *= static_cast<int>(side);
  auto decode = [&](int idx) {
    Site z{};
    for (int i = p.d - 1; i >= 0; --i) {
      z[static_cast<std::size_t>(i)] = idx % side - radius;
      idx /= static_cast<int>(side);
    }
    return z;
  };
  auto encode = [&](const Site& z) {
    int idx = 0;
    for (int i = 0; i < p.d; ++i)
      idx = idx * static_cast<int>(side) + static_cast<int>(z[static_cast<std::size_t>(i)] + radius);
    return idx;
  };
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  for (int idx = 0; idx < n; ++idx) {
    Site z = decode(idx);
    a[static_cast<std::size_t>(idx) * n + idx] = field.xi(z) - 2.0 * p.d;
    for (int i = 0; i < p.d; ++i) {
      for (int s : {-1, 1}) {
        Site nb = z;
        nb[static_cast<std::size_t>(i)] += s;
        if (std::llabs(nb[static_cast<std::size_t>(i)]) > radius) continue;
        a[static_cast<std::size_t>(idx) * n + encode(nb)] += 1.0;
      }
    }
  }
  std::vector<double> lam, Q;
  jacobi_eigen(a, n, lam, Q);
  Site origin{};
  int o = encode(origin);
  double lmax = lam[0];
  for (double l : lam) lmax = std::max(lmax, l);
  std::vector<double> u(static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < n; ++k) {
    double ck = Q[static_cast<std::size_t>(o) * n + k];
    double g = std::exp(t * (lam[static_cast<std::size_t>(k)] - lmax)) * ck;
    for (int i = 0; i < n; ++i) u[static_cast<std::size_t>(i)] += Q[static_cast<std::size_t>(i) * n + k] * g;
  }
  double total = 0.0;
  for (double& x : u) {
    x = std::max(x, 0.0);
    total += x;
  }
  HeatOracle out;
  out.log_mass = t * lmax + std::log(total);
  out.v.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out.v[i] = u[i] / total;
  return out;
}

/// Exhaustive argmax of the growth functional over the ball, via the
/// per-site field interface only.
inline std::pair<Site, double> brute_argmax(const pam::PotentialField& field, double t,
                                            i64 radius) {
  const auto& p = field.params();
  Site best{};
  double best_phi = -1.0;
  bool have = false;
  pam::for_each_l1_site(p.d, radius, [&](const Site& z) {
    double xi = field.xi(z);
    double v = pam::phi(p, t, z, xi);
    if (v <= 0.0) return;
    if (!have || v > best_phi ||
        (v == best_phi && pam::site_beats(z, best, p.d))) {
      best = z;
      best_phi = v;
      have = true;
    }
  });
  return {best, best_phi};
}

}  // namespace oracle
