#include <doctest.h>

#include <cmath>
#include <functional>

#include "crddme/eafe.hpp"

using namespace crddme;

namespace {

double simpson(const std::function<double(double)> &f, double a, double b, double fa, double fm,
               double fb, double whole, int depth) {
  const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 1e-15 * std::abs(whole))
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, depth - 1) + simpson(f, m, b, fm, frm, fb, right, depth - 1);
}

double integrate01(const std::function<double(double)> &f) {
  const double fa = f(0.0), fm = f(0.5), fb = f(1.0);
  return simpson(f, 0.0, 1.0, fa, fm, fb, (fa + 4.0 * fm + fb) / 6.0, 40);
}

double max_abs_column_sum(const SparseMatrix &m) {
  double worst = 0.0;
  for (int c = 0; c < m.outerSize(); ++c) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(m, c); it; ++it)
      s += it.value();
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

double max_abs(const SparseMatrix &m) {
  double v = 0.0;
  for (int c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it)
      v = std::max(v, std::abs(it.value()));
  return v;
}

std::vector<Mesh> test_meshes(int max_level) {
  std::vector<Mesh> out;
  for (int l = 0; l <= max_level; ++l) {
    out.push_back(generate_mesh(SquareShape{{0.5, 0.5}, 2.0}, l));
    out.push_back(generate_mesh(DiskShape{{-0.5, 0.0}, 1.0}, l));
  }
  return out;
}

} // namespace

TEST_SUITE("eafe") {

TEST_CASE("Bernoulli function") {
  CHECK(bernoulli(0.0) == 1.0);
  CHECK(bernoulli(1e-10) == doctest::Approx(1.0 - 0.5e-10).epsilon(1e-15));
  CHECK(bernoulli(1.0) == doctest::Approx(1.0 / (std::exp(1.0) - 1.0)).epsilon(1e-15));
  CHECK(bernoulli(-2.0) == doctest::Approx(-2.0 / (std::exp(-2.0) - 1.0)).epsilon(1e-15));
  CHECK(bernoulli(800.0) >= 0.0);
  CHECK(bernoulli(-800.0) == doctest::Approx(800.0));
  // B(-t) = B(t) + t
  for (double t : {0.3, 2.0, 17.0})
    CHECK(bernoulli(-t) == doctest::Approx(bernoulli(t) + t).epsilon(1e-14));
}

TEST_CASE("P1 Laplacian on the unit right triangle") {
  // Cotangent weights: legs meet at the right angle (cot = 0 opposite the
  // hypotenuse), the other two angles are pi/4 (cot = 1): weights 1/2, 1/2, 0.
  const Mesh m = Mesh::from_triangles({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}});
  const StiffnessMatrix s = assemble_p1_laplacian(m);
  CHECK(s(0, 1) == doctest::Approx(0.5));
  CHECK(s(0, 2) == doctest::Approx(0.5));
  CHECK(s(1, 2) == doctest::Approx(0.0));
  // The classical stiffness of -Laplace has the opposite sign.
  CHECK(-s(0, 1) == doctest::Approx(-0.5));
  CHECK(s(0, 0) == doctest::Approx(-1.0));
  CHECK(s.symmetric);
  CHECK(check_m_matrix(s).is_m_matrix);
}

TEST_CASE("Laplacian annihilates constants") {
  for (const Mesh &m : test_meshes(2)) {
    const StiffnessMatrix s = assemble_p1_laplacian(m, 3.0);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.num_nodes());
    CHECK((s.matrix * ones).cwiseAbs().maxCoeff() <= 1e-12 * max_abs(s.matrix));
    CHECK(check_m_matrix(s).is_m_matrix);
  }
}

TEST_CASE("constant potential reduces to the P1 Laplacian") {
  for (const Mesh &m : test_meshes(2))
    for (double d : {1.0, 0.1, 10.0}) {
      const StiffnessMatrix l = assemble_p1_laplacian(m, d);
      const StiffnessMatrix e = assemble_eafe_stiffness(m, ConstantPotential{4.0}, d);
      CHECK(max_abs(Eigen::SparseMatrix<double>(l.matrix - e.matrix)) <= 1e-14 * max_abs(l.matrix) + 1e-300);
    }
}

TEST_CASE("potential linear on edges matches the Bernoulli closed form") {
  const Mesh m = generate_mesh(DiskShape{{0, 0}, 1.0}, 2);
  const PotentialField phi = LinearPotential{0.5, {3.0, -2.0}};
  const double d = 0.7;
  // Enough Gauss points that the edge average is exact to rounding.
  const StiffnessMatrix s = assemble_eafe_stiffness(m, phi, d, 12);
  const std::vector<double> w = p1_edge_weights(m);
  for (int e = 0; e < m.num_edges(); ++e) {
    const int i = m.edges()[static_cast<std::size_t>(e)].nodes[0];
    const int j = m.edges()[static_cast<std::size_t>(e)].nodes[1];
    const double pi = phi.value(m.node(i)), pj = phi.value(m.node(j));
    const double w_ij = w[static_cast<std::size_t>(e)];
    CHECK(s(i, j) == doctest::Approx(w_ij * d * bernoulli(pi - pj)).epsilon(1e-12));
    CHECK(s(j, i) == doctest::Approx(w_ij * d * bernoulli(pj - pi)).epsilon(1e-12));
  }
}

TEST_CASE("quadratic potential: quadrature agrees with adaptive integration") {
  const Mesh m = generate_mesh(SquareShape{{0.5, 0.5}, 2.0}, 3);
  const PotentialField phi = QuadraticPotential{1.0};
  const StiffnessMatrix s = assemble_eafe_stiffness(m, phi, 1.0);
  const std::vector<double> w = p1_edge_weights(m);
  for (int e = 0; e < m.num_edges(); e += 7) {
    const int i = m.edges()[static_cast<std::size_t>(e)].nodes[0];
    const int j = m.edges()[static_cast<std::size_t>(e)].nodes[1];
    const Vec2 xi = m.node(i), xj = m.node(j);
    const double pj = phi.value(xj);
    const double avg = integrate01([&](double t) { return std::exp(phi.value(xj + t * (xi - xj)) - pj); });
    CHECK(s(i, j) == doctest::Approx(w[static_cast<std::size_t>(e)] / avg).epsilon(1e-10));
  }
}

TEST_CASE("nodal tables use the closed form") {
  const Mesh m = generate_mesh(SquareShape{{0, 0}, 1.0}, 2);
  const PotentialField q = QuadraticPotential{5.0};
  const PotentialField t = NodalTablePotential{q.nodal_values(m)};
  const StiffnessMatrix s = assemble_eafe_stiffness(m, t, 2.0);
  const std::vector<double> w = p1_edge_weights(m);
  const Edge &e = m.edges()[5];
  const int i = e.nodes[0], j = e.nodes[1];
  CHECK(s(i, j) == doctest::Approx(w[5] * 2.0 * bernoulli(q.value(m.node(i)) - q.value(m.node(j)))));
}

TEST_CASE("columns sum to zero and M-matrix on Delaunay meshes") {
  const std::vector<PotentialField> fields{QuadraticPotential{1.0}, QuadraticPotential{30.0},
                                           TwoWellPotential{}, RadialPiecewisePotential{1.0, 0.5}};
  for (const Mesh &m : test_meshes(2))
    for (const PotentialField &f : fields) {
      const StiffnessMatrix s = assemble_eafe_stiffness(m, f, 1.0);
      CHECK(max_abs_column_sum(s.matrix) <= 1e-12 * max_abs(s.matrix));
      const MMatrixReport r = check_m_matrix(s);
      CHECK(r.is_m_matrix);
      CHECK(r.violating_edges.empty());
      const RateOperator l = transition_rate_matrix(s, dual_cells(m));
      CHECK(max_abs_column_sum(l.matrix) <= 1e-12 * l.max_exit_rate());
    }
}

TEST_CASE("non-Delaunay pair is reported") {
  // Flat rhombus split along its long diagonal: both opposite angles are obtuse.
  const Mesh m = Mesh::from_triangles({{0, 0}, {2, 0}, {1, 0.2}, {1, -0.2}}, {{0, 1, 2}, {1, 0, 3}});
  const StiffnessMatrix s = assemble_eafe_stiffness(m, ConstantPotential{}, 1.0);
  const MMatrixReport r = check_m_matrix(s);
  CHECK_FALSE(r.is_m_matrix);
  REQUIRE(r.violating_edges.size() == 1);
  CHECK(r.violating_edges[0] == std::array<int, 2>{0, 1});
  CHECK(r.min_offdiag < 0.0);
  CHECK_THROWS_AS(transition_rate_matrix(s, dual_cells(m)), MMatrixError);
  const RateOperator clamped = transition_rate_matrix(s, dual_cells(m), "x", true);
  CHECK(clamped.matrix.coeff(0, 1) == 0.0);

  const Mesh single = Mesh::from_triangles({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}});
  CHECK(check_m_matrix(assemble_p1_laplacian(single)).is_m_matrix);
}

TEST_CASE("standard FEM loses monotonicity under strong drift") {
  const Mesh m = generate_mesh(SquareShape{{0, 0}, 1.0}, 1);
  const PotentialField steep = LinearPotential{0.0, {40.0, 15.0}};
  CHECK_FALSE(check_m_matrix(assemble_standard_fem_stiffness(m, steep, 1.0)).is_m_matrix);
  CHECK(check_m_matrix(assemble_eafe_stiffness(m, steep, 1.0)).is_m_matrix);
  // Without drift both coincide with the Laplacian.
  const StiffnessMatrix a = assemble_standard_fem_stiffness(m, ConstantPotential{}, 1.0);
  const StiffnessMatrix b = assemble_p1_laplacian(m, 1.0);
  CHECK(max_abs(Eigen::SparseMatrix<double>(a.matrix - b.matrix)) <= 1e-14);
}

TEST_CASE("discrete Gibbs-Boltzmann is stationary and detailed balanced") {
  const std::vector<PotentialField> fields{QuadraticPotential{1.0}, QuadraticPotential{30.0},
                                           TwoWellPotential{}, LinearPotential{0, {2, 1}}};
  for (const Mesh &m : test_meshes(2)) {
    const DualCells d = dual_cells(m);
    for (const PotentialField &f : fields) {
      const RateOperator l = transition_rate_matrix(assemble_eafe_stiffness(m, f, 10.0), d);
      const GibbsBoltzmann gb = discrete_gibbs_boltzmann(m, d, f);
      const EquilibriumResiduals r = verify_equilibrium(l, gb.p);
      CHECK(r.stationarity <= 1e-12 * r.max_exit_rate);
      CHECK(r.detailed_balance <= 1e-12);
    }
  }
}

TEST_CASE("detailed balance check has power") {
  const Mesh m = generate_mesh(SquareShape{{0, 0}, 1.0}, 2);
  const DualCells d = dual_cells(m);
  const RateOperator l = transition_rate_matrix(assemble_eafe_stiffness(m, QuadraticPotential{1.0}, 1.0), d);
  std::vector<double> uniform(d.volumes);
  for (double &v : uniform)
    v /= d.total_volume();
  CHECK(verify_equilibrium(l, uniform).detailed_balance > 1e-3);
}

TEST_CASE("constant potential: symmetric detailed balance") {
  const Mesh m = generate_mesh(DiskShape{{0.05, 0.05}, 0.1}, 2);
  const DualCells d = dual_cells(m);
  const RateOperator l = transition_rate_matrix(assemble_eafe_stiffness(m, ConstantPotential{}, 0.1), d);
  for (int c = 0; c < l.matrix.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(l.matrix, c); it; ++it) {
      const auto i = static_cast<std::size_t>(it.row()), j = static_cast<std::size_t>(it.col());
      if (i == j)
        continue;
      CHECK(it.value() * d.volumes[j] == doctest::Approx(l.matrix.coeff(it.col(), it.row()) * d.volumes[i]).epsilon(1e-13));
    }
  CHECK(l.num_hops() <= static_cast<std::size_t>(2 * m.num_edges()));
}

}
