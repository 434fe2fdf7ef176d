#include <doctest.h>

#include <cmath>
#include <memory>

#include "crddme/fpe_oracle.hpp"
#include "crddme/ssa.hpp"
#include "crddme/stats.hpp"
#include "support.hpp"

using namespace crddme;
using crddme::test::build_model;
using crddme::test::SpeciesSpec;

namespace {

std::vector<SpeciesSpec> abc() {
  return {{"A", 1e-3, QuadraticPotential{100.0}},
          {"B", 2e-3, QuadraticPotential{50.0}},
          {"C", 5e-4, QuadraticPotential{80.0}}};
}

crddme::test::BuiltModel small_reversible(int level = 0) {
  return build_model(generate_mesh(DiskShape{{0.05, 0.05}, 0.1}, level), abc(), {50.0, 0.04, 0.5}, true);
}

} // namespace

TEST_SUITE("ssa") {

TEST_CASE("channel table layout") {
  const auto b = small_reversible();
  const ChannelTable t(b.model);
  std::size_t hops = 0, assoc = 0, dissoc = 0;
  for (const Channel &c : t.channels()) {
    hops += c.kind == ChannelKind::hop;
    assoc += c.kind == ChannelKind::association;
    dissoc += c.kind == ChannelKind::dissociation;
  }
  CHECK(hops == b.model->hops[0].num_hops() + b.model->hops[1].num_hops() + b.model->hops[2].num_hops());
  CHECK(assoc == b.assoc->pairs.size());
  std::size_t active = 0;
  for (double r : b.dissoc->total)
    active += r > 0.0;
  CHECK(dissoc == active);

  // Propensity of an association channel is kappa+_ij a_i b_j.
  SystemState s = test::empty_state(*b.model);
  const AssociationPair &p = b.assoc->pairs.front();
  s.counts[0][static_cast<std::size_t>(p.i)] = 2;
  s.counts[1][static_cast<std::size_t>(p.j)] += 3;
  for (std::size_t c = 0; c < t.size(); ++c)
    if (t.channels()[c].kind == ChannelKind::association && t.channels()[c].from == 0)
      CHECK(t.propensity(static_cast<int>(c), s) == doctest::Approx(6.0 * p.rate));
  // Every hop channel reads the count of its source voxel.
  for (std::size_t c = 0; c < t.size(); ++c) {
    const Channel &ch = t.channels()[c];
    if (ch.kind != ChannelKind::hop)
      continue;
    bool found = false;
    for (int r : t.readers(ch.species, ch.from))
      found = found || r == static_cast<int>(c);
    CHECK(found);
  }
}

TEST_CASE("runs are deterministic and replayable") {
  const auto b = small_reversible(1);
  auto table = std::make_shared<const ChannelTable>(b.model);
  SystemState init = test::empty_state(*b.model);
  init.counts[0][0] = 3;
  init.counts[1][5] = 2;
  init.counts[2][7] = 1;
  SimulationOptions o;
  o.t_end = 5.0;
  o.record_events = true;
  o.record_snapshots = true;
  for (int k = 1; k <= 20; ++k)
    o.sample_times.push_back(0.25 * k);
  Simulator sim(table);
  const SimulationResult r1 = sim.run(init, 42, o);
  const SimulationResult r2 = sim.run(init, 42, o);
  CHECK(r1.n_events > 100);
  CHECK(r1.final_state == r2.final_state);
  CHECK(r1.log.events.size() == r2.log.events.size());
  CHECK(r1.log.replay_matches_snapshots(*b.model, init));
  const SystemState replayed = r1.log.replay(*b.model, init);
  CHECK(replayed.counts == r1.final_state.counts);
  const SimulationResult r3 = sim.run(init, 43, o);
  CHECK(r3.log.events.size() != r1.log.events.size());

  // Conservation of A + C and B + C at every snapshot.
  for (const SystemState &s : r1.log.snapshots) {
    CHECK(s.total(0) + s.total(2) == 4);
    CHECK(s.total(1) + s.total(2) == 3);
  }
}

TEST_CASE("annihilation conserves a - b") {
  const Mesh m = generate_mesh(DiskShape{{0.05, 0.05}, 0.1}, 1);
  const auto b = build_model(m, {abc()[0], abc()[1]}, {50.0, 0.04, 0.5}, false);
  auto table = std::make_shared<const ChannelTable>(b.model);
  SystemState init = test::empty_state(*b.model);
  init.counts[0][0] = 5;
  init.counts[1][3] = 3;
  SimulationOptions o;
  o.t_end = 100.0;
  o.record_snapshots = true;
  for (int k = 1; k <= 50; ++k)
    o.sample_times.push_back(2.0 * k);
  Simulator sim(table);
  const SimulationResult r = sim.run(init, 9, o);
  for (const SystemState &s : r.log.snapshots)
    CHECK(s.total(0) - s.total(1) == 2);
  CHECK(r.final_state.total(1) == 0);
}

TEST_CASE("single-particle occupancy follows Gibbs-Boltzmann") {
  const Mesh m = generate_mesh(DiskShape{{0.05, 0.05}, 0.1}, 1);
  const DualCells d = dual_cells(m);
  auto model = std::make_shared<ReactionModel>();
  model->species = {"A"};
  model->hops.push_back(test::hop_operator(m, d, {"A", 1e-3, QuadraticPotential{200.0}}));
  auto table = std::make_shared<const ChannelTable>(model);
  const GibbsBoltzmann gb = discrete_gibbs_boltzmann(m, d, QuadraticPotential{200.0});
  // Samples spaced by several relaxation times of the slowest mode.
  SimulationOptions o;
  const int n = 20000;
  const double spacing = 10.0;
  std::vector<double> obs(static_cast<std::size_t>(m.num_nodes()), 0.0);
  for (int k = 1; k <= n; ++k)
    o.sample_times.push_back(spacing * k);
  o.t_end = spacing * n;
  o.observer = [&](std::size_t, const SystemState &s) {
    for (int v = 0; v < m.num_nodes(); ++v)
      obs[static_cast<std::size_t>(v)] += s.counts[0][static_cast<std::size_t>(v)];
  };
  SystemState init = test::empty_state(*model);
  init.counts[0][0] = 1;
  Simulator(table).run(init, 5, o);
  const ChiSquareResult chi = chi_square_test(obs, gb.p);
  MESSAGE("chi-square " << chi.statistic << " dof " << chi.dof << " p " << chi.p_value);
  CHECK(chi.p_value > 1e-3);
}

TEST_CASE("binding probability matches the two-particle oracle") {
  const auto b = small_reversible();
  auto table = std::make_shared<const ChannelTable>(b.model);
  const auto &h = b.model->hops;
  const TwoParticleGenerator g = build_two_particle_generator(h[0], h[1], &h[2], *b.assoc, b.dissoc.get(),
                                                               TwoParticleMode::reversible);
  std::vector<double> grid;
  for (int k = 1; k <= 10; ++k)
    grid.push_back(0.02 * k);
  std::vector<double> p0 = uniform_pair_distribution(b.duals.volumes);
  p0.resize(static_cast<std::size_t>(g.size()), 0.0);
  const auto exact = transient_solve(g.q, p0, grid);

  EnsembleOutputs out;
  out.t_grid = grid;
  const std::vector<InitialPlacement> init{{InitialPlacement::Kind::uniform_by_area, 0, 1, 0, {}},
                                           {InitialPlacement::Kind::uniform_by_area, 1, 1, 0, {}}};
  const std::size_t n = 20000;
  const EnsembleResult e = run_ensemble(table, b.duals.volumes, init, n, 77, grid.back(), out);
  const int nv = b.mesh.num_nodes();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double bound = 0.0;
    for (int v = 0; v < nv; ++v)
      bound += exact[k][static_cast<std::size_t>(g.bound_index(v))];
    double hits = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      hits += e.totals[r][k][2];
    const double est = hits / static_cast<double>(n);
    const double se = std::sqrt(bound * (1 - bound) / static_cast<double>(n));
    CHECK(std::abs(est - bound) <= 4.0 * se);
  }
}

TEST_CASE("ensembles are reproducible and ordered by realization") {
  const auto b = small_reversible();
  auto table = std::make_shared<const ChannelTable>(b.model);
  const std::vector<InitialPlacement> init{{InitialPlacement::Kind::uniform_by_area, 0, 2, 0, {}},
                                           {InitialPlacement::Kind::uniform_by_area, 1, 2, 0, {}}};
  EnsembleOutputs out;
  out.binding_times = true;
  out.t_grid = {0.1, 0.2};
  const EnsembleResult a = run_ensemble(table, b.duals.volumes, init, 50, 1, 0.2, out);
  const EnsembleResult c = run_ensemble(table, b.duals.volumes, init, 50, 1, 0.2, out);
  CHECK(a.totals == c.totals);
  CHECK(a.n_events == c.n_events);
  const EnsembleResult head = run_ensemble(table, b.duals.volumes, init, 10, 1, 0.2, out);
  for (std::size_t r = 0; r < 10; ++r)
    CHECK(head.totals[r] == a.totals[r]);
}

TEST_CASE("linear conversion time is exponential") {
  const Mesh m = generate_mesh(SquareShape{{0, 0}, 1.0}, 0);
  const DualCells d = dual_cells(m);
  auto model = std::make_shared<ReactionModel>();
  model->species = {"A", "B"};
  model->hops.push_back(test::hop_operator(m, d, {"A", 0.1, ConstantPotential{}}));
  model->hops.push_back(test::hop_operator(m, d, {"B", 0.1, ConstantPotential{}}));
  model->linear.push_back({0, 1, 2.5});
  auto table = std::make_shared<const ChannelTable>(model);
  std::vector<double> grid;
  for (int k = 1; k <= 8; ++k)
    grid.push_back(0.1 * k);
  EnsembleOutputs out;
  out.t_grid = grid;
  const std::size_t n = 20000;
  const EnsembleResult e = run_ensemble(table, d.volumes, {{InitialPlacement::Kind::at_voxel, 0, 1, 3, {}}},
                                        n, 3, grid.back(), out);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double left = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      left += e.totals[r][k][0];
    const double p = std::exp(-2.5 * grid[k]);
    CHECK(std::abs(left / n - p) <= 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("initial placements") {
  const auto b = small_reversible(1);
  Rng rng(1);
  const SystemState pv = sample_initial_state(*b.model, b.duals.volumes,
                                              {{InitialPlacement::Kind::per_voxel, 0, 3, 0, {1, 4}},
                                               {InitialPlacement::Kind::at_voxel, 1, 2, 6, {}}},
                                              rng);
  CHECK(pv.counts[0][1] == 3);
  CHECK(pv.counts[0][4] == 3);
  CHECK(pv.total(0) == 6);
  CHECK(pv.counts[1][6] == 2);

  std::vector<double> obs(b.duals.volumes.size(), 0.0);
  for (int k = 0; k < 20000; ++k) {
    const SystemState s = sample_initial_state(
        *b.model, b.duals.volumes, {{InitialPlacement::Kind::uniform_by_area, 0, 1, 0, {}}}, rng);
    for (std::size_t v = 0; v < obs.size(); ++v)
      obs[v] += s.counts[0][v];
  }
  std::vector<double> p = b.duals.volumes;
  for (double &x : p)
    x /= b.duals.total_volume();
  CHECK(chi_square_test(obs, p).p_value > 1e-3);

  // A restricted region only receives molecules inside it.
  const SystemState r = sample_initial_state(
      *b.model, b.duals.volumes, {{InitialPlacement::Kind::uniform_by_area, 2, 50, 0, {2, 3}}}, rng);
  CHECK(r.counts[2][2] + r.counts[2][3] == 50);
}

}
