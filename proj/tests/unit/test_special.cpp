#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pam/special.hpp"
#include "pam/stats.hpp"

using namespace pam;

TEST_CASE("adaptive quadrature") {
  CHECK(integrate([](double x) { return x * x; }, 0.0, 1.0, 1e-12) ==
        Catch::Approx(1.0 / 3.0).epsilon(1e-11));
  CHECK(integrate([](double x) { return std::sin(x); }, 0.0, M_PI, 1e-12) ==
        Catch::Approx(2.0).epsilon(1e-11));
  // mildly singular endpoint
  CHECK(integrate([](double x) { return 1.0 / std::sqrt(x); }, 1e-16, 1.0, 1e-10) ==
        Catch::Approx(2.0).margin(1e-6));
  // sharply peaked integrand
  double gauss = std::sqrt(M_PI) / 20.0 * (std::erf(7.0) + std::erf(3.0));
  CHECK(integrate([](double x) { return std::exp(-100.0 * (x - 0.3) * (x - 0.3)); }, 0.0, 1.0,
                  1e-12) == Catch::Approx(gauss).epsilon(1e-9));
}

TEST_CASE("kolmogorov distribution") {
  // classical critical points
  CHECK(kolmogorov_tail(1.3581) == Catch::Approx(0.05).margin(2e-4));
  CHECK(kolmogorov_tail(1.6276) == Catch::Approx(0.01).margin(2e-4));
  CHECK(kolmogorov_quantile(0.05) == Catch::Approx(1.3581).margin(2e-3));
  CHECK(kolmogorov_quantile(0.01) == Catch::Approx(1.6276).margin(2e-3));
}

TEST_CASE("ks statistics") {
  // exact uniform grid has distance 1/(2n) + o(1) against U(0,1)
  std::vector<double> xs;
  for (int i = 0; i < 100; ++i) xs.push_back((i + 0.5) / 100.0);
  CHECK(ks_distance(xs, [](double x) { return x; }) == Catch::Approx(0.005).margin(1e-12));

  std::vector<double> a = {0.1, 0.2, 0.3}, b = {0.15, 0.25, 0.35};
  CHECK(ks_two_sample(a, b) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("trend helpers") {
  CHECK(ls_slope({1, 2, 3, 4}, {4, 3, 2, 1}) == Catch::Approx(-1.0).epsilon(1e-12));
  CHECK(strictly_decreasing({3.0, 2.0, 1.0}));
  CHECK_FALSE(strictly_decreasing({3.0, 3.0, 1.0}));
}
