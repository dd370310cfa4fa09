#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "pam/common.hpp"
#include "pam/model.hpp"
#include "pam/rng.hpp"

namespace pam {

// Seeded i.i.d. Pareto(alpha) field on Z^d, evaluable lazily on unbounded
// boxes. Two consistent layers (full construction in docs/randomness.md):
//
//  * bulk: per-site counter-based PRF mapped to the uniform range
//    (P(level_min), 1], i.e. potentials below the band cutoff;
//  * bands: for each dyadic cell (per-dim side 2^l, level_min <= l <= 60) a
//    counter-based stream draws how many sites of the cell carry a uniform
//    in the level's band (P(l+1), P(l)], where P(l) = c 2^{-ld}, plus their
//    positions and values. The top level owns the whole tail (0, P(60)].
//
// Sites claimed by a band are exactly the sites with potentials above the
// cutoff, so "argmax over a huge box" queries only touch cells at levels
// coarse enough for the requested threshold: cost is proportional to the
// number of qualifying sites, not to the box volume.

struct FieldPoint {
  Site z{};
  double xi = 1.0;
  i64 l1 = 0;
};

class PotentialField {
 public:
  static constexpr int kTopLevel = 60;
  static constexpr double kPointsPerCell = 2.0;
  static constexpr u64 kSiteTag = 0x53495445ULL;  // bulk value stream
  static constexpr u64 kBandTag = 0x42414E44ULL;  // band cell stream

  PotentialField(ModelParams params, u64 seed,
                 std::vector<std::pair<Site, double>> overrides = {})
      : p_(params), seed_(seed), overrides_(std::move(overrides)) {
    level_min_ = 1;
    while (level_min_ * p_.d < 10) ++level_min_;
    std::sort(overrides_.begin(), overrides_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [z, v] : overrides_) {
      if (!(v >= 1.0)) throw std::domain_error("override potential below support");
    }
    bulk_cut_u_ = band_prob(level_min_);
    xi_cut_ = std::pow(bulk_cut_u_, -1.0 / p_.alpha);
  }

  const ModelParams& params() const { return p_; }
  u64 seed() const { return seed_; }
  int level_min() const { return level_min_; }
  /// Largest potential the bulk layer can produce; band queries below this
  /// threshold are not meaningful.
  double band_cutoff_xi() const { return xi_cut_; }

  /// Potential at one site. Deterministic and stateless.
  double xi(const Site& z) const {
    if (auto ov = override_at(z)) return *ov;
    for (int l = kTopLevel; l >= level_min_; --l) {
      double v = claim_at_level(l, z);
      if (v > 0.0) return v;
    }
    return bulk_xi(z);
  }

  double xi(std::initializer_list<i64> cs) const { return xi(make_site(cs)); }

  /// Visit every site with |z|_1 <= radius and xi(z) >= xi_min. Threshold
  /// below the band cutoff needs a dense pass, allowed only while the box
  /// fits the site budget.
  template <typename Visitor>
  void enumerate_above(i64 radius, double xi_min, double site_budget, Visitor&& visit) const {
    if (xi_min >= xi_cut_) {
      band_enumerate(radius, xi_min, visit);
      overrides_enumerate(radius, xi_min, visit);
      return;
    }
    if (l1_ball_site_count(p_.d, radius) > site_budget) {
      throw resource_error("enumerate_above: threshold below band cutoff on a box beyond the site budget");
    }
    dense_scan(radius, [&](const Site& z, double v, i64 l1) {
      if (v >= xi_min) visit(z, v, l1);
    });
  }

  /// Dense pass over the ball |z|_1 <= radius: bulk PRF for every site, then
  /// band claims and overrides patched on top. Visits sites in lexicographic
  /// order. No budget check; caller is responsible.
  template <typename Visitor>
  void dense_scan(i64 radius, Visitor&& visit) const {
    struct Patch {
      Site z;
      double xi;
      i64 l1;
      int rank;  // 0 = override, then bands coarse to fine
    };
    std::vector<Patch> patch;
    for (int l = kTopLevel; l >= level_min_; --l) {
      visit_cells(l, radius, [&](const Site& cell) {
        cell_points(l, cell, [&](const Site& z, double v) {
          i64 l1 = l1_norm(z, p_.d);
          if (l1 <= radius) patch.push_back({z, v, l1, kTopLevel - l + 1});
        });
      });
    }
    for (const auto& [z, v] : overrides_) {
      i64 l1 = l1_norm(z, p_.d);
      if (l1 <= radius) patch.push_back({z, v, l1, 0});
    }
    std::sort(patch.begin(), patch.end(), [](const Patch& a, const Patch& b) {
      if (a.z != b.z) return a.z < b.z;
      return a.rank < b.rank;
    });
    patch.erase(std::unique(patch.begin(), patch.end(),
                            [](const Patch& a, const Patch& b) { return a.z == b.z; }),
                patch.end());
    std::size_t cursor = 0;
    for_each_l1_site(p_.d, radius, [&](const Site& z) {
      while (cursor < patch.size() && patch[cursor].z < z) ++cursor;
      if (cursor < patch.size() && patch[cursor].z == z) {
        visit(z, patch[cursor].xi, patch[cursor].l1);
      } else {
        visit(z, bulk_xi(z), l1_norm(z, p_.d));
      }
    });
  }

  /// Top `keep` sites of the ball by the growth functional at time t,
  /// descending, ties by larger l1 norm then lexicographically larger
  /// coordinates. Gated sites (t xi < |z|) are skipped.
  std::vector<std::tuple<Site, double, double>> scan_candidates(double t, i64 radius, int keep,
                                                                double site_budget = 2e7) const {
    if (radius < 0) throw std::domain_error("scan_candidates: radius must be >= 0");
    if (keep < 1) throw std::domain_error("scan_candidates: keep must be >= 1");
    if (l1_ball_site_count(p_.d, radius) > site_budget)
      throw resource_error("scan_candidates: box exceeds site budget");
    struct Entry {
      Site z;
      double xi, phi;
    };
    std::vector<Entry> top;
    auto better = [&](const Entry& a, const Entry& b) {
      if (a.phi != b.phi) return a.phi > b.phi;
      return site_beats(a.z, b.z, p_.d);
    };
    dense_scan(radius, [&](const Site& z, double v, i64 l1) {
      if (t * v < static_cast<double>(l1)) return;  // gated, cannot beat phi(0) >= 1
      Entry e{z, v, phi_value(t, l1, eta(z, p_.d), v)};
      top.push_back(e);
      if (top.size() > static_cast<std::size_t>(4 * keep + 16)) {
        std::nth_element(top.begin(), top.begin() + keep, top.end(), better);
        top.resize(static_cast<std::size_t>(keep));
      }
    });
    std::sort(top.begin(), top.end(), better);
    if (top.size() > static_cast<std::size_t>(keep)) top.resize(static_cast<std::size_t>(keep));
    std::vector<std::tuple<Site, double, double>> out;
    out.reserve(top.size());
    for (const auto& e : top) out.emplace_back(e.z, e.xi, e.phi);
    return out;
  }

  /// Band probability P(l) = c 2^{-ld}: a site carries a uniform <= P(l)
  /// exactly when some level >= l claims it.
  double band_prob(int level) const {
    return kPointsPerCell * std::exp2(-static_cast<double>(level) * p_.d);
  }

 private:
  ModelParams p_;
  u64 seed_;
  std::vector<std::pair<Site, double>> overrides_;
  int level_min_ = 10;
  double bulk_cut_u_ = 0.0;
  double xi_cut_ = 1.0;

  std::optional<double> override_at(const Site& z) const {
    auto it = std::lower_bound(overrides_.begin(), overrides_.end(), z,
                               [](const auto& a, const Site& s) { return a.first < s; });
    if (it != overrides_.end() && it->first == z) return it->second;
    return std::nullopt;
  }

  double bulk_xi(const Site& z) const {
    Stream st(site_key(seed_, kSiteTag, p_.d, z));
    double u = bulk_cut_u_ + (1.0 - bulk_cut_u_) * st.u01();
    return std::pow(u, -1.0 / p_.alpha);
  }

  // Uniform range owned by band level l: (lo, hi].
  void band_range(int level, double& lo, double& hi) const {
    hi = band_prob(level);
    lo = (level == kTopLevel) ? 0.0 : band_prob(level + 1);
  }

  u64 cell_key(int level, const Site& cell) const {
    u64 h = absorb(seed_ ^ kBandTag, static_cast<u64>(level));
    h = absorb(h, static_cast<u64>(p_.d));
    for (int i = 0; i < p_.d; ++i) h = absorb(h, zigzag(cell[static_cast<std::size_t>(i)]));
    return h;
  }

  template <typename Fn>
  void cell_points(int level, const Site& cell, Fn&& fn) const {
    Stream st(cell_key(level, cell));
    double lo, hi;
    band_range(level, lo, hi);
    double n_sites = std::exp2(static_cast<double>(level) * p_.d);
    int k = binomial_small(st, n_sites, hi - lo);
    for (int j = 0; j < k; ++j) {
      Site z{};
      for (int i = 0; i < p_.d; ++i) {
        u64 off = st.bits(level);
        z[static_cast<std::size_t>(i)] =
            (cell[static_cast<std::size_t>(i)] << level) + static_cast<i64>(off);
      }
      double u = lo + (hi - lo) * st.u01();
      fn(z, std::pow(u, -1.0 / p_.alpha));
    }
  }

  double claim_at_level(int level, const Site& z) const {
    Site cell{};
    for (int i = 0; i < p_.d; ++i) cell[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(i)] >> level;
    double found = 0.0;
    cell_points(level, cell, [&](const Site& pt, double v) {
      if (found == 0.0 && pt == z) found = v;
    });
    return found;
  }

  template <typename Visitor>
  void overrides_enumerate(i64 radius, double xi_min, Visitor&& visit) const {
    for (const auto& [z, v] : overrides_) {
      i64 l1 = l1_norm(z, p_.d);
      if (l1 <= radius && v >= xi_min) visit(z, v, l1);
    }
  }

  // Emit all band claims in the ball with xi >= xi_min. A site claimed at
  // two levels is emitted twice; the coarser (larger) value is the one xi()
  // reports, and consumers keeping per-site maxima agree with it.
  template <typename Visitor>
  void band_enumerate(i64 radius, double xi_min, Visitor&& visit) const {
    double u_max = std::pow(std::max(xi_min, 1.0), -p_.alpha);
    for (int l = kTopLevel; l >= level_min_; --l) {
      double lo, hi;
      band_range(l, lo, hi);
      if (lo >= u_max) break;  // this and all finer bands sit above the threshold
      visit_cells(l, radius, [&](const Site& cell) {
        cell_points(l, cell, [&](const Site& z, double v) {
          if (v < xi_min) return;
          if (override_at(z)) return;
          i64 l1 = l1_norm(z, p_.d);
          if (l1 <= radius) visit(z, v, l1);
        });
      });
    }
  }

  // Visit index vectors of level-l cells intersecting the ball.
  template <typename Fn>
  void visit_cells(int level, i64 radius, Fn&& fn) const {
    i64 lo_idx = (-radius) >> level;
    i64 hi_idx = radius >> level;
    Site cell{};
    i64 side = i64{1} << level;
    auto rec = [&](auto&& self, int dim, i64 min_l1) -> void {
      if (min_l1 > radius) return;
      if (dim == p_.d) {
        fn(static_cast<const Site&>(cell));
        return;
      }
      for (i64 c = lo_idx; c <= hi_idx; ++c) {
        cell[static_cast<std::size_t>(dim)] = c;
        i64 lo = c << level, hi = lo + side - 1;
        i64 contrib = (lo <= 0 && 0 <= hi) ? 0 : std::min(std::llabs(lo), std::llabs(hi));
        self(self, dim + 1, min_l1 + contrib);
      }
      cell[static_cast<std::size_t>(dim)] = 0;
    };
    rec(rec, 0, 0);
  }
};

}  // namespace pam
