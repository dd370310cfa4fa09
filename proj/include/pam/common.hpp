#pragma once

#include <array>
#include <cstdint>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pam {

using u64 = std::uint64_t;
using i64 = std::int64_t;

/// Thrown when a box/site/cell budget would be exceeded.
struct resource_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when an explicit time step violates its stability bound.
struct stability_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxDim = 4;

/// Lattice site. Only the first `d` coordinates are meaningful; the rest
/// must stay zero so that comparisons and hashing are dimension-agnostic.
using Site = std::array<i64, kMaxDim>;

inline Site make_site(std::initializer_list<i64> cs) {
  Site z{};
  int i = 0;
  for (i64 c : cs) z[static_cast<std::size_t>(i++)] = c;
  return z;
}

inline i64 l1_norm(const Site& z, int d) {
  i64 s = 0;
  for (int i = 0; i < d; ++i) s += std::llabs(z[static_cast<std::size_t>(i)]);
  return s;
}

/// Deterministic total order used for all tie-breaks: larger l1 norm wins,
/// then lexicographically larger coordinates.
inline bool site_beats(const Site& a, const Site& b, int d) {
  i64 la = l1_norm(a, d), lb = l1_norm(b, d);
  if (la != lb) return la > lb;
  for (int i = 0; i < d; ++i) {
    if (a[static_cast<std::size_t>(i)] != b[static_cast<std::size_t>(i)])
      return a[static_cast<std::size_t>(i)] > b[static_cast<std::size_t>(i)];
  }
  return false;
}

inline bool site_equal(const Site& a, const Site& b) { return a == b; }

inline std::string site_to_string(const Site& z, int d) {
  std::string s = "(";
  for (int i = 0; i < d; ++i) {
    if (i) s += ",";
    s += std::to_string(z[static_cast<std::size_t>(i)]);
  }
  return s + ")";
}

/// Number of lattice sites with |z|_1 <= R in Z^d, as a double (exact for
/// small d, used for budget checks only).
inline double l1_ball_site_count(int d, i64 R) {
  if (R < 0) return 0.0;
  double total = 0.0;
  double choose_d = 1.0;  // C(d, i)
  double choose_R = 1.0;  // C(R, i)
  double pow2 = 1.0;
  for (int i = 0; i <= d; ++i) {
    total += pow2 * choose_d * choose_R;
    choose_d *= static_cast<double>(d - i) / (i + 1);
    choose_R *= static_cast<double>(R - i) / (i + 1);
    pow2 *= 2.0;
  }
  return total;
}

/// Visit every site of the l1 ball of radius R in Z^d in lexicographic
/// order of coordinates.
template <typename F>
void for_each_l1_site(int d, i64 R, F&& fn) {
  Site z{};
  auto rec = [&](auto&& self, int dim, i64 budget) -> void {
    if (dim == d - 1) {
      for (i64 c = -budget; c <= budget; ++c) {
        z[static_cast<std::size_t>(dim)] = c;
        fn(static_cast<const Site&>(z));
      }
      z[static_cast<std::size_t>(dim)] = 0;
      return;
    }
    for (i64 c = -budget; c <= budget; ++c) {
      z[static_cast<std::size_t>(dim)] = c;
      self(self, dim + 1, budget - std::llabs(c));
    }
    z[static_cast<std::size_t>(dim)] = 0;
  };
  if (d == 0) return;
  rec(rec, 0, R);
}

/// Static-striped parallel loop. Work item i runs exactly once; results must
/// be written to slot i so the aggregate is independent of thread count.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  unsigned workers = std::min<unsigned>(jobs, static_cast<unsigned>(n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline unsigned default_jobs() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1u : hc;
}

}  // namespace pam
