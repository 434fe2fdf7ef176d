#include <doctest.h>

#include <cmath>

#include "crddme/bd.hpp"
#include "crddme/errors.hpp"
#include "crddme/stats.hpp"

using namespace crddme;

namespace {

BDConfig free_config(Shape domain, double d, PotentialField phi, double dt) {
  BDConfig c;
  c.domain = domain;
  c.species = {{"A", d, phi}};
  c.dt = dt;
  return c;
}

} // namespace

TEST_SUITE("bd") {

TEST_CASE("configuration is validated") {
  BDConfig c = free_config(SquareShape{{0, 0}, 1.0}, 1.0, ConstantPotential{}, 0.0);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.dt = 1e-3;
  CHECK_NOTHROW(c.validate());
  c.species[0].d = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.species[0].d = 1.0;
  c.species[0].potential = NodalTablePotential{{1.0}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.species[0].potential = QuadraticPotential{1e6};
  c.dt = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("reflection keeps particles inside") {
  const BDSimulator sq(free_config(SquareShape{{0, 0}, 2.0}, 1.0, ConstantPotential{}, 1e-3));
  CHECK(sq.reflect({1.5, 0.2}).x == doctest::Approx(0.5));
  CHECK(sq.reflect({-1.25, -1.5}).y == doctest::Approx(-0.5));
  CHECK(sq.reflect({0.3, 0.4}) == Vec2{0.3, 0.4});
  const BDSimulator dk(free_config(DiskShape{{1, 1}, 1.0}, 1.0, ConstantPotential{}, 1e-3));
  const Vec2 r = dk.reflect({3.5, 1.0});
  CHECK(r.x == doctest::Approx(0.5));
  CHECK(r.y == doctest::Approx(1.0));
  for (double a = 0.0; a < 6.0; a += 0.37)
    CHECK(dk.inside(dk.reflect({1.0 + 1.7 * std::cos(a), 1.0 + 1.7 * std::sin(a)})));

  // Many steps of a fast particle in a small disk never escape.
  const BDSimulator small(free_config(DiskShape{{0, 0}, 0.1}, 10.0, ConstantPotential{}, 1e-5));
  Rng rng(1);
  BDState s = small.sample_initial({{0, 200, {}, {}}}, rng);
  BDRunOptions o;
  o.t_end = 0.01;
  bool all_inside = true;
  o.sample_times = {0.002, 0.005, 0.01};
  o.observer = [&](std::size_t, const BDState &st) {
    for (const Vec2 &p : st.positions[0])
      all_inside = all_inside && small.inside(p);
  };
  small.run(s, 3, o);
  CHECK(all_inside);
}

TEST_CASE("free diffusion has mean square displacement 4 D t") {
  const double d = 0.5, t = 0.2;
  const BDSimulator sim(free_config(SquareShape{{0, 0}, 100.0}, d, ConstantPotential{}, 1e-3));
  Rng rng(2);
  const BDState s = sim.sample_initial({{0, 20000, {}, Vec2{0.0, 0.0}}}, rng);
  BDRunOptions o;
  o.t_end = t;
  const BDResult r = sim.run(s, 4, o);
  double msd = 0.0;
  for (const Vec2 &p : r.final_state.positions[0])
    msd += norm2(p) / 20000.0;
  CHECK(msd == doctest::Approx(4.0 * d * t).epsilon(0.02));
  CHECK(r.dt_units == 200);
}

TEST_CASE("long-time positions follow the continuous Gibbs-Boltzmann density") {
  // phi = 2|x|^2 on the unit disk: ring probabilities are
  // (exp(-2 a^2) - exp(-2 b^2)) / (1 - exp(-2)).
  const BDSimulator sim(free_config(DiskShape{{0, 0}, 1.0}, 1.0, QuadraticPotential{2.0}, 1e-4));
  Rng rng(6);
  const BDState s = sim.sample_initial({{0, 4000, {}, {}}}, rng);
  BDRunOptions o;
  o.t_end = 3.0;
  const BDResult r = sim.run(s, 8, o);
  const int bins = 10;
  std::vector<double> obs(bins, 0.0), p(bins, 0.0);
  for (const Vec2 &x : r.final_state.positions[0])
    obs[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(norm(x) * bins)))] += 1;
  for (int k = 0; k < bins; ++k) {
    const double a = static_cast<double>(k) / bins, b = static_cast<double>(k + 1) / bins;
    p[static_cast<std::size_t>(k)] = (std::exp(-2 * a * a) - std::exp(-2 * b * b)) / (1 - std::exp(-2.0));
  }
  const ChiSquareResult chi = chi_square_test(obs, p);
  MESSAGE("chi-square " << chi.statistic << " p " << chi.p_value);
  CHECK(chi.p_value > 1e-3);
}

TEST_CASE("runs are deterministic and conserve molecules") {
  BDConfig c;
  c.domain = DiskShape{{0, 0}, 0.2};
  c.species = {{"A", 0.1, QuadraticPotential{1.0}}, {"B", 0.1, QuadraticPotential{1.0}},
               {"C", 0.05, QuadraticPotential{1.0}}};
  c.bimolecular = BDBimolecular{0, 1, 2, {1e4, 0.02, 0.5}, DissociationMode{DetailedBalanceMode{2.0}}};
  c.dt = 1e-5;
  c.partition_level = 3;
  const BDSimulator sim(c);
  CHECK(sim.unbinding_rate({0.0, 0.0}) > 0.0);
  EnsembleOutputs out;
  out.t_grid = {0.01, 0.05, 0.1};
  const std::vector<BDInitial> init{{0, 3, {}, {}}, {1, 2, {}, {}}};
  const BDEnsembleResult a = run_bd_ensemble(sim, init, 20, 5, 0.1, out);
  const BDEnsembleResult b = run_bd_ensemble(sim, init, 20, 5, 0.1, out);
  CHECK(a.totals == b.totals);
  CHECK(a.steps == b.steps);
  int bound = 0;
  for (const auto &run : a.totals)
    for (const auto &t : run) {
      CHECK(t[0] + t[2] == 3);
      CHECK(t[1] + t[2] == 2);
      bound += t[2];
    }
  CHECK(bound > 0);
}

TEST_CASE("annihilation binding times and first-order conversions") {
  BDConfig c;
  c.domain = SquareShape{{0, 0}, 0.1};
  c.species = {{"A", 10.0, ConstantPotential{}}, {"B", 10.0, ConstantPotential{}}};
  c.bimolecular = BDBimolecular{0, 1, -1, {1e9, 0.001, 0.5}, std::nullopt};
  c.dt = 1e-9;
  const BDSimulator sim(c);
  EnsembleOutputs out;
  out.binding_times = true;
  const BDEnsembleResult r = run_bd_ensemble(sim, {{0, 1, {}, {}}, {1, 1, {}, {}}}, 50, 1, 1.0, out);
  for (double t : r.binding_times) {
    CHECK(t > 0.0);
    CHECK(std::isfinite(t));
  }

  BDConfig l;
  l.domain = SquareShape{{0, 0}, 1.0};
  l.species = {{"A", 0.1, ConstantPotential{}}, {"B", 0.1, ConstantPotential{}}};
  l.linear = {{0, 1, 2.0}};
  l.dt = 1e-4;
  const BDSimulator ls(l);
  EnsembleOutputs lo;
  lo.t_grid = {0.25, 0.5};
  const std::size_t n = 4000;
  const BDEnsembleResult lr = run_bd_ensemble(ls, {{0, 1, {}, {}}}, n, 9, 0.5, lo);
  for (std::size_t k = 0; k < 2; ++k) {
    double left = 0.0;
    for (const auto &run : lr.totals)
      left += run[k][0];
    const double p = std::exp(-2.0 * lo.t_grid[k]);
    CHECK(std::abs(left / n - p) <= 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

}
