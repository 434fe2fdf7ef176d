#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "crddme/stats.hpp"

using namespace crddme;

TEST_SUITE("stats") {

TEST_CASE("empirical survival") {
  const SurvivalCurve s = ecdf_survival({3.0, 1.0, 2.0});
  CHECK(s(0.5) == 1.0);
  CHECK(s(1.0) == doctest::Approx(2.0 / 3.0));
  CHECK(s(1.5) == doctest::Approx(2.0 / 3.0));
  CHECK(s(2.5) == doctest::Approx(1.0 / 3.0));
  CHECK(s(10.0) == 0.0);

  const double inf = std::numeric_limits<double>::infinity();
  const SurvivalCurve c = ecdf_survival({1.0, inf, inf, 2.0});
  CHECK(c.n == 4);
  CHECK(c(5.0) == doctest::Approx(0.5));

  // Ties collapse into one jump.
  const SurvivalCurve t = ecdf_survival({1.0, 1.0, 2.0, 2.0});
  CHECK(t.times.size() == 2);
  CHECK(t(1.0) == doctest::Approx(0.5));
}

TEST_CASE("sup distance sees both sides of a jump") {
  const SurvivalCurve s = ecdf_survival({1.0});
  // Against f = 0.5 the step is 0.5 away on either side.
  CHECK(sup_distance(s, [](double) { return 0.5; }) == doctest::Approx(0.5));
  // Left limit at t = 1 is 1 against exp(-1).
  CHECK(sup_distance(s, [](double t) { return std::exp(-t); }) == doctest::Approx(1.0 - std::exp(-1.0)));
}

TEST_CASE("normal quantile and DKW width") {
  CHECK(normal_critical(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-9));
  CHECK(normal_critical(0.99) == doctest::Approx(2.5758293035489).epsilon(1e-9));
  CHECK(dkw_epsilon(10000, 0.01) == doctest::Approx(std::sqrt(std::log(200.0) / 20000.0)));
}

TEST_CASE("mean confidence interval") {
  const MeanCI c = mean_ci({1.0, 3.0});
  CHECK(c.mean == doctest::Approx(2.0));
  CHECK(c.std_error == doctest::Approx(1.0));
  CHECK(c.halfwidth == doctest::Approx(1.959963984540054));
  const MeanCI z = mean_ci({4.0, 4.0, 4.0});
  CHECK(z.halfwidth == 0.0);
  CHECK_THROWS(mean_ci({1.0}));
}

TEST_CASE("interval coverage is close to nominal") {
  std::mt19937_64 g(2024);
  std::normal_distribution<double> nd(3.0, 2.0);
  const int trials = 4000;
  int covered = 0;
  for (int k = 0; k < trials; ++k) {
    std::vector<double> x(200);
    for (double &v : x)
      v = nd(g);
    const MeanCI c = mean_ci(x);
    covered += std::abs(c.mean - 3.0) <= c.halfwidth ? 1 : 0;
  }
  const double frac = static_cast<double>(covered) / trials;
  CHECK(frac >= 0.93);
  CHECK(frac <= 0.97);
}

TEST_CASE("DKW band holds for exponential samples") {
  std::mt19937_64 g(7);
  std::exponential_distribution<double> ex(2.0);
  std::vector<double> x(5000);
  for (double &v : x)
    v = ex(g);
  const double d = sup_distance(ecdf_survival(x), [](double t) { return std::exp(-2.0 * t); });
  CHECK(d <= dkw_epsilon(x.size(), 0.01));
  CHECK(d > 0.0);
  // A wrong rate is detected.
  CHECK(sup_distance(ecdf_survival(x), [](double t) { return std::exp(-2.4 * t); }) >
        dkw_epsilon(x.size(), 0.01));
}

TEST_CASE("curves and overlap") {
  const std::vector<std::vector<bool>> ind{{false, true}, {false, false}, {false, true}, {false, true}};
  const auto c = pbound_curve(ind, {0.0, 1.0});
  REQUIRE(c.size() == 2);
  CHECK(c[0].value == 0.0);
  CHECK(c[1].value == doctest::Approx(0.75));
  CHECK(c[1].halfwidth == doctest::Approx(1.959963984540054 * std::sqrt(0.75 * 0.25 / 4)));

  const auto m = mean_curve({{1.0, 2.0}, {3.0, 2.0}}, {0.0, 1.0});
  CHECK(m[0].value == doctest::Approx(2.0));
  CHECK(m[1].halfwidth == 0.0);

  std::vector<CurvePoint> a{{0, 1.0, 0.1}, {1, 1.0, 0.1}}, b{{0, 1.15, 0.1}, {1, 1.3, 0.1}};
  CHECK(overlap_fraction(a, b) == doctest::Approx(0.5));
}

TEST_CASE("convergence report on synthetic data") {
  // s_l = s* + c h_l^2.
  std::vector<double> h{1.0, 0.5, 0.25, 0.125, 0.0625}, v;
  for (double x : h)
    v.push_back(1.0 + 0.5 * x * x);
  const ConvergenceReport r = convergence_report(v, h);
  REQUIRE(r.steps.size() == 4);
  for (std::size_t l = 0; l + 1 < r.steps.size(); ++l) {
    REQUIRE(r.steps[l].ratio.has_value());
    CHECK(*r.steps[l].ratio == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(*r.steps[l].order == doctest::Approx(2.0).epsilon(1e-6));
  }
  CHECK_FALSE(r.noise_limited);
  CHECK_FALSE(r.summary().empty());

  // Differences below the noise are flagged.
  const ConvergenceReport n = convergence_report({1.0, 1.5, 1.51, 1.515}, {1, 0.5, 0.25, 0.125}, {0.01, 0.01, 0.01, 0.01});
  CHECK(n.steps[0].resolvable);
  CHECK_FALSE(n.steps[2].resolvable);
  CHECK(n.noise_limited);
}

TEST_CASE("chi-square goodness of fit") {
  const ChiSquareResult r = chi_square_test({10, 20, 30}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(r.statistic == doctest::Approx(10.0));
  CHECK(r.dof == 2);
  CHECK(r.p_value == doctest::Approx(std::exp(-5.0)).epsilon(1e-9));

  // Permutation invariance.
  const ChiSquareResult p = chi_square_test({30, 10, 20}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(p.statistic == doctest::Approx(r.statistic));

  // Small bins are pooled: expected 1 and 1 merge into one bin of 2.
  const ChiSquareResult pooled = chi_square_test({48, 50, 1, 1}, {0.49, 0.49, 0.01, 0.01});
  CHECK(pooled.dof == 2);

  std::mt19937_64 g(3);
  std::discrete_distribution<int> dd({0.1, 0.2, 0.3, 0.4});
  std::vector<double> obs(4, 0.0);
  for (int k = 0; k < 100000; ++k)
    obs[static_cast<std::size_t>(dd(g))] += 1;
  CHECK(chi_square_test(obs, {0.1, 0.2, 0.3, 0.4}).p_value > 0.001);
  CHECK(chi_square_test(obs, {0.11, 0.2, 0.3, 0.39}).p_value < 1e-6);
}

}
