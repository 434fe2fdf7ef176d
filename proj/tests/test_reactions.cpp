#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "crddme/errors.hpp"
#include "crddme/reactions.hpp"

using namespace crddme;

namespace {

double pair_integral_square(double r, double l) {
  // Measure of {(x, y) in [0,l]^2 x [0,l]^2 : |x - y| <= r} for r <= l.
  return std::numbers::pi * r * r * l * l - 8.0 / 3.0 * r * r * r * l + 0.5 * r * r * r * r;
}

double weighted_total(const AssociationTable &t, const std::vector<double> &vol) {
  double s = 0.0;
  for (const AssociationPair &p : t.pairs)
    s += p.rate * vol[static_cast<std::size_t>(p.i)] * vol[static_cast<std::size_t>(p.j)];
  return s;
}

// Uniform sample of the barycentric dual cell of node i: a point of a
// triangle incident to i belongs to the cell when i has the largest
// barycentric coordinate there.
struct DualCellOracle {
  const Mesh &mesh;
  std::vector<int> tris;
  std::vector<double> cdf;
  int node;

  DualCellOracle(const Mesh &m, int i) : mesh(m), node(i) {
    double acc = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) {
      const Triangle &tri = m.triangles()[static_cast<std::size_t>(t)];
      if (tri[0] == i || tri[1] == i || tri[2] == i) {
        tris.push_back(t);
        acc += m.triangle_area(t);
        cdf.push_back(acc);
      }
    }
    for (double &c : cdf)
      c /= acc;
  }

  Vec2 draw(std::mt19937_64 &g) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
      const double pick = u(g);
      std::size_t k = 0;
      while (k + 1 < cdf.size() && cdf[k] < pick)
        ++k;
      const Triangle &tri = mesh.triangles()[static_cast<std::size_t>(tris[k])];
      double a = u(g), b = u(g);
      if (a + b > 1.0) {
        a = 1.0 - a;
        b = 1.0 - b;
      }
      const double l[3] = {1.0 - a - b, a, b};
      int best = 0;
      for (int q = 1; q < 3; ++q)
        if (l[q] > l[best])
          best = q;
      if (tri[static_cast<std::size_t>(best)] != node)
        continue;
      return l[0] * mesh.node(tri[0]) + l[1] * mesh.node(tri[1]) + l[2] * mesh.node(tri[2]);
    }
  }
};

ReactionTables make_tables(const Mesh &m, const DualCells &d, const DissociationMode &mode,
                           const PotentialField &pa, const PotentialField &pb, const PotentialField &pc,
                           DoiKernel k = {1e6, 0.02, 0.5}) {
  ReactionTables t;
  t.kernel = k;
  t.mode = mode;
  t.options.samples_per_pair = 300;
  t.options.seed = 7;
  t.association = tabulate_association(m, d, t.kernel, t.options);
  t.dissociation = tabulate_dissociation(t.association, d.volumes, pa.nodal_values(m),
                                         pb.nodal_values(m), pc.nodal_values(m), mode);
  return t;
}

} // namespace

TEST_SUITE("reactions") {

TEST_CASE("kernel validation") {
  CHECK_THROWS_AS(DoiKernel({1.0, 0.0, 0.5}).validate(), ConfigError);
  CHECK_THROWS_AS(DoiKernel({-1.0, 0.1, 0.5}).validate(), ConfigError);
  CHECK_THROWS_AS(DoiKernel({1.0, 0.1, 1.5}).validate(), ConfigError);
  CHECK_NOTHROW(DoiKernel({1.0, 0.1, 0.5}).validate());
}

TEST_CASE("total reactive volume matches the closed form on a square") {
  const Mesh m = generate_mesh(SquareShape{{0.5, 0.5}, 1.0}, 3);
  const DualCells d = dual_cells(m);
  const double r = 0.1;
  const double exact = pair_integral_square(r, 1.0);
  for (auto method : {TabulationOptions::Method::product, TabulationOptions::Method::ball}) {
    TabulationOptions o;
    o.samples_per_pair = 2000;
    o.method = method;
    const AssociationTable t = tabulate_association(m, d, {1.0, r, 0.5}, o);
    CHECK(weighted_total(t, d.volumes) == doctest::Approx(exact).epsilon(0.01));
  }
}

TEST_CASE("saturation and exclusion") {
  const Mesh m = generate_mesh(SquareShape{{0, 0}, 1.0}, 0);
  const DualCells d = dual_cells(m);
  // r_b larger than the domain diameter: the indicator is one everywhere.
  const AssociationTable all = tabulate_association(m, d, {3.0, 2.0, 0.5}, {200, 1, TabulationOptions::Method::product});
  CHECK(all.pairs.size() == static_cast<std::size_t>(m.num_nodes() * m.num_nodes()));
  for (const AssociationPair &p : all.pairs)
    CHECK(p.rate == doctest::Approx(3.0).epsilon(1e-12));

  const Mesh f = generate_mesh(SquareShape{{0, 0}, 1.0}, 3);
  const DualCells fd = dual_cells(f);
  const double rb = 0.02;
  const AssociationTable t = tabulate_association(f, fd, {1.0, rb, 0.5}, {200, 1, TabulationOptions::Method::automatic});
  for (const AssociationPair &p : t.pairs) {
    const double reach = rb + 2.0 * fd.radius[static_cast<std::size_t>(p.i)] + 2.0 * fd.radius[static_cast<std::size_t>(p.j)];
    CHECK(distance(f.node(p.i), f.node(p.j)) <= reach);
  }
}

TEST_CASE("straddling pair matches a brute-force Monte Carlo estimate") {
  const Mesh m = generate_mesh(SquareShape{{0, 0}, 1.0}, 1);
  const DualCells d = dual_cells(m);
  // Neighbouring nodes with the reaction radius comparable to their spacing.
  const int i = m.edges()[0].nodes[0], j = m.edges()[0].nodes[1];
  const double rb = 0.6 * distance(m.node(i), m.node(j));
  TabulationOptions o;
  o.samples_per_pair = 40000;
  o.method = TabulationOptions::Method::product;
  const AssociationTable t = tabulate_association(m, d, {1.0, rb, 0.5}, o);

  const DualCellOracle ci(m, i), cj(m, j);
  std::mt19937_64 g(12345);
  const int n = 1000000;
  int hits = 0;
  for (int s = 0; s < n; ++s)
    hits += distance(ci.draw(g), cj.draw(g)) <= rb ? 1 : 0;
  const double oracle = static_cast<double>(hits) / n;
  REQUIRE(oracle > 0.05);
  CHECK(t.rate(i, j) == doctest::Approx(oracle).epsilon(0.01));
}

TEST_CASE("placements sum to pair rates exactly and tables are deterministic") {
  const Mesh m = generate_mesh(DiskShape{{0.05, 0.05}, 0.1}, 2);
  const DualCells d = dual_cells(m);
  const AssociationTable a = tabulate_association(m, d, {1e6, 0.01, 0.5}, {500, 3, TabulationOptions::Method::automatic});
  const AssociationTable b = tabulate_association(m, d, {1e6, 0.01, 0.5}, {500, 3, TabulationOptions::Method::automatic});
  REQUIRE(a.pairs.size() == b.pairs.size());
  for (std::size_t p = 0; p < a.pairs.size(); ++p) {
    const AssociationPair &x = a.pairs[p];
    double s = 0.0;
    for (int q = x.begin; q < x.end; ++q)
      s += a.placements[static_cast<std::size_t>(q)].rate;
    CHECK(s == x.rate);
    CHECK(x.rate == b.pairs[p].rate);
    CHECK(x.i == b.pairs[p].i);
  }
  const AssociationTable c = tabulate_association(m, d, {1e6, 0.01, 0.5}, {500, 4, TabulationOptions::Method::automatic});
  bool differs = false;
  for (std::size_t p = 0; p < std::min(a.pairs.size(), c.pairs.size()); ++p)
    differs = differs || a.pairs[p].rate != c.pairs[p].rate;
  CHECK(differs);
}

TEST_CASE("gamma one half gives mirrored symmetry") {
  const Mesh m = generate_mesh(DiskShape{{0.05, 0.05}, 0.1}, 2);
  const DualCells d = dual_cells(m);
  for (auto method : {TabulationOptions::Method::product, TabulationOptions::Method::ball}) {
    const AssociationTable t = tabulate_association(m, d, {1.0, 0.015, 0.5}, {400, 1, method});
    for (const AssociationPair &p : t.pairs) {
      const int q = t.find(p.j, p.i);
      REQUIRE(q >= 0);
      const AssociationPair &r = t.pairs[static_cast<std::size_t>(q)];
      CHECK(std::abs(p.rate - r.rate) <= 1e-12 * p.rate);
      REQUIRE(p.end - p.begin == r.end - r.begin);
      for (int k = 0; k < p.end - p.begin; ++k) {
        const PlacedRate &u = t.placements[static_cast<std::size_t>(p.begin + k)];
        const PlacedRate &v = t.placements[static_cast<std::size_t>(r.begin + k)];
        CHECK(u.k == v.k);
        CHECK(std::abs(u.rate - v.rate) <= 1e-12 * u.rate);
      }
    }
  }
}

TEST_CASE("detailed balance of the discrete reaction rates") {
  const Mesh m = generate_mesh(DiskShape{{0.05, 0.05}, 0.1}, 2);
  const DualCells d = dual_cells(m);
  const PotentialField q = QuadraticPotential{1.0}, q2 = QuadraticPotential{30.0};
  const double kd = 2.0;
  const ReactionTables t = make_tables(m, d, DetailedBalanceMode{kd}, q, q2, q);
  const GibbsBoltzmann ga = discrete_gibbs_boltzmann(m, d, q);
  const GibbsBoltzmann gb = discrete_gibbs_boltzmann(m, d, q2);
  const GibbsBoltzmann gc = discrete_gibbs_boltzmann(m, d, q);
  // Two-particle equilibrium: unbound K_d/(1+K_d) P_A,i P_B,j, bound 1/(1+K_d) P_C,k.
  std::size_t checked = 0;
  for (int k = 0; k < m.num_nodes(); ++k)
    for (int e = t.dissociation.begin[static_cast<std::size_t>(k)]; e < t.dissociation.begin[static_cast<std::size_t>(k) + 1]; ++e) {
      const DissociationEntry &en = t.dissociation.entries[static_cast<std::size_t>(e)];
      const AssociationPair &p = t.association.pairs[static_cast<std::size_t>(t.association.find(en.i, en.j))];
      double kplus = 0.0;
      for (int s = p.begin; s < p.end; ++s)
        if (t.association.placements[static_cast<std::size_t>(s)].k == k)
          kplus = t.association.placements[static_cast<std::size_t>(s)].rate;
      const double lhs = kplus * kd / (1 + kd) * ga.p[static_cast<std::size_t>(en.i)] * gb.p[static_cast<std::size_t>(en.j)];
      const double rhs = en.rate / (1 + kd) * gc.p[static_cast<std::size_t>(k)];
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
      ++checked;
    }
  CHECK(checked == t.association.placements.size());
}

TEST_CASE("constant potentials reduce to the pure diffusion formula") {
  const Mesh m = generate_mesh(SquareShape{{0, 0}, 0.1}, 2);
  const DualCells d = dual_cells(m);
  const PotentialField c = ConstantPotential{0.7};
  const double kd = 2.0;
  const ReactionTables t = make_tables(m, d, DetailedBalanceMode{kd}, c, c, c, {1e6, 0.02, 0.5});
  const double omega = d.total_volume();
  for (int k = 0; k < m.num_nodes(); ++k)
    for (int e = t.dissociation.begin[static_cast<std::size_t>(k)]; e < t.dissociation.begin[static_cast<std::size_t>(k) + 1]; ++e) {
      const DissociationEntry &en = t.dissociation.entries[static_cast<std::size_t>(e)];
      const AssociationPair &p = t.association.pairs[static_cast<std::size_t>(t.association.find(en.i, en.j))];
      double kplus = 0.0;
      for (int s = p.begin; s < p.end; ++s)
        if (t.association.placements[static_cast<std::size_t>(s)].k == k)
          kplus = t.association.placements[static_cast<std::size_t>(s)].rate;
      const double expect = kd * d.volumes[static_cast<std::size_t>(en.i)] * d.volumes[static_cast<std::size_t>(en.j)] /
                            (omega * d.volumes[static_cast<std::size_t>(k)]) * kplus;
      CHECK(en.rate == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("detailed-balance unbinding approaches the continuous kernel under refinement") {
  // Oracle: the total unbinding rate of voxel k against the continuous rate at
  // its node, K_d lambda Z_C/(Z_A Z_B) exp(phi_C) int exp(-phi_A - phi_B) dw.
  // Check away from the boundary, where the continuous integral is not cut.
  const PotentialField q = QuadraticPotential{40.0};
  const DoiKernel kernel{1e6, 0.03, 0.5};
  const Shape shape = SquareShape{{0, 0}, 0.4};
  std::vector<double> errs;
  for (int level = 1; level <= 3; ++level) {
    const Mesh m = generate_mesh(shape, level);
    const DualCells d = dual_cells(m);
    ReactionTables t = make_tables(m, d, DetailedBalanceMode{2.0}, q, q, q, kernel);
    const Mesh fine = generate_mesh(shape, 5);
    const double lz = continuous_partition_function(fine, q).log_z;
    ContinuousUnbinding cu(kernel, q, q, q, lz, lz, lz, 2.0, {8, 32, {}});
    const int centre = PointLocator(m).locate_cell({0.0, 0.0});
    errs.push_back(std::abs(t.dissociation.total[static_cast<std::size_t>(centre)] - cu.rate({0.0, 0.0})) /
                   cu.rate({0.0, 0.0}));
  }
  CHECK(errs[2] < errs[0]);
  CHECK(errs[2] < 0.05);
}

TEST_CASE("fixed-rate dissociation") {
  const Mesh m = generate_mesh(DiskShape{{0, 0}, 5.6}, 1);
  const DualCells d = dual_cells(m);
  const PotentialField flat = ConstantPotential{};
  const ReactionTables t = make_tables(m, d, FixedRateMode{0.1}, flat, flat,
                                       RadialPiecewisePotential{1.0, 4.0}, {2e5 / 6.023, 0.015, 0.5});
  for (int k = 0; k < m.num_nodes(); ++k) {
    CHECK(t.dissociation.total[static_cast<std::size_t>(k)] == doctest::Approx(0.1).epsilon(1e-12));
    const int b = t.dissociation.begin[static_cast<std::size_t>(k)], e = t.dissociation.begin[static_cast<std::size_t>(k) + 1];
    REQUIRE(e > b);
    bool incoming = false;
    for (const PlacedRate &pr : t.association.placements)
      incoming = incoming || pr.k == k;
    if (!incoming) {
      CHECK(e - b == 1);
      CHECK(t.dissociation.entries[static_cast<std::size_t>(b)].i == k);
      CHECK(t.dissociation.entries[static_cast<std::size_t>(b)].j == k);
    }
  }
  CHECK_THROWS_AS(tabulate_dissociation(t.association, d.volumes, flat.nodal_values(m), flat.nodal_values(m),
                                        flat.nodal_values(m), FixedRateMode{0.0}),
                  ConfigError);
}

TEST_CASE("table persistence") {
  const Mesh m = generate_mesh(DiskShape{{0.05, 0.05}, 0.1}, 1);
  const DualCells d = dual_cells(m);
  const PotentialField q = QuadraticPotential{1.0};
  const ReactionTables t = make_tables(m, d, DetailedBalanceMode{2.0}, q, q, q);
  std::stringstream s;
  write_tables(s, t, m.hash());
  const std::string text = s.str();
  std::istringstream in(text);
  const ReactionTables r = read_tables(in, m.hash());
  CHECK(r.checksum() == t.checksum());
  CHECK(r.association.pairs.size() == t.association.pairs.size());
  CHECK(r.dissociation.total == t.dissociation.total);
  CHECK(r.kernel.lambda == t.kernel.lambda);

  std::istringstream wrong_mesh(text);
  CHECK_THROWS_AS(read_tables(wrong_mesh, m.hash() + 1), ConfigError);

  std::string tampered = text;
  const auto pos = tampered.find("\nA ");
  REQUIRE(pos != std::string::npos);
  const auto eol = tampered.find('\n', pos + 1);
  tampered.insert(eol, "1");
  std::istringstream bad(tampered);
  CHECK_THROWS_AS(read_tables(bad), ConfigError);
}

TEST_CASE("continuous unbinding with constant potentials") {
  const DoiKernel k{1e6, 0.001, 0.5};
  const double area = 0.04;
  const double lz = std::log(area);
  ContinuousUnbinding cu(k, ConstantPotential{}, ConstantPotential{}, ConstantPotential{}, lz, lz, lz, 2.0, {});
  const double expect = 2.0 * 1e6 * std::numbers::pi * 1e-6 / area;
  CHECK(cu.rate({0.01, 0.02}) == doctest::Approx(expect).epsilon(1e-12));
  Rng rng(3);
  double mean_r2 = 0.0;
  const int n = 20000;
  for (int s = 0; s < n; ++s) {
    const auto [x, y] = cu.sample({0.01, 0.02}, rng);
    CHECK(distance(x, y) <= k.r_b * (1 + 1e-12));
    const Vec2 mid = 0.5 * (x + y);
    CHECK(distance(mid, {0.01, 0.02}) <= 1e-12);
    mean_r2 += norm2(x - y) / n;
  }
  // Uniform on the disk: E|w|^2 = r_b^2 / 2.
  CHECK(mean_r2 == doctest::Approx(0.5 * k.r_b * k.r_b).epsilon(0.02));
}

TEST_CASE("continuous unbinding with quadratic potentials matches Monte Carlo") {
  const DoiKernel k{1e5, 0.3, 0.3};
  const PotentialField a = QuadraticPotential{1.0}, b = QuadraticPotential{3.0}, c = QuadraticPotential{2.0};
  ContinuousUnbinding cu(k, a, b, c, 0.0, 0.0, 0.0, 2.0, {});
  const Vec2 z{0.2, -0.1};
  std::mt19937_64 g(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 1000000;
  double sum = 0.0;
  for (int s = 0; s < n; ++s) {
    const double r = k.r_b * std::sqrt(u(g)), th = 2 * std::numbers::pi * u(g);
    const Vec2 w{r * std::cos(th), r * std::sin(th)};
    sum += std::exp(c.value(z) - a.value(z + (1 - k.gamma) * w) - b.value(z - k.gamma * w));
  }
  const double oracle = 2.0 * k.lambda * std::numbers::pi * k.r_b * k.r_b * sum / n;
  CHECK(cu.rate(z) == doctest::Approx(oracle).epsilon(0.005));
  Rng rng(5);
  for (int s = 0; s < 1000; ++s) {
    const auto [x, y] = cu.sample(z, rng);
    CHECK(distance(k.gamma * x + (1 - k.gamma) * y, z) <= 1e-12);
  }
}

TEST_CASE("equilibrium binding flux converges under refinement") {
  const PotentialField q = QuadraticPotential{1.0};
  const Shape shape = DiskShape{{0.05, 0.05}, 0.1};
  std::vector<double> flux;
  for (int level = 0; level <= 3; ++level) {
    const Mesh m = generate_mesh(shape, level);
    const DualCells d = dual_cells(m);
    const GibbsBoltzmann g = discrete_gibbs_boltzmann(m, d, q);
    const AssociationTable t = tabulate_association(m, d, {1.0, 0.03, 0.5}, {1000, 1, TabulationOptions::Method::product});
    double f = 0.0;
    for (const AssociationPair &p : t.pairs)
      f += p.rate * g.p[static_cast<std::size_t>(p.i)] * g.p[static_cast<std::size_t>(p.j)];
    flux.push_back(f);
  }
  const double d1 = std::abs(flux[1] - flux[0]), d2 = std::abs(flux[2] - flux[1]), d3 = std::abs(flux[3] - flux[2]);
  MESSAGE("flux differences " << d1 << " " << d2 << " " << d3);
  CHECK(d3 < d1);
  CHECK(d3 < 0.05 * flux[3]);
}

}
