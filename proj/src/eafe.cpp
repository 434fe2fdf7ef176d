#include "crddme/eafe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "crddme/quadrature.hpp"

namespace crddme {

namespace {

using Triplet = Eigen::Triplet<double>;

// Adds the zero-column-sum diagonal to off-diagonal triplets and compresses.
SparseMatrix with_generator_diagonal(int n, std::vector<Triplet> &offdiag) {
  std::vector<double> colsum(static_cast<std::size_t>(n), 0.0);
  for (const Triplet &t : offdiag)
    colsum[static_cast<std::size_t>(t.col())] += t.value();
  for (int j = 0; j < n; ++j)
    offdiag.emplace_back(j, j, -colsum[static_cast<std::size_t>(j)]);
  SparseMatrix m(n, n);
  m.setFromTriplets(offdiag.begin(), offdiag.end());
  m.makeCompressed();
  return m;
}

} // namespace

std::vector<double> p1_edge_weights(const Mesh &mesh) {
  std::vector<double> w(static_cast<std::size_t>(mesh.num_edges()), 0.0);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge &edge = mesh.edges()[static_cast<std::size_t>(e)];
    const Vec2 a = mesh.node(edge.nodes[0]), b = mesh.node(edge.nodes[1]);
    for (int t : edge.triangles) {
      if (t < 0)
        continue;
      for (int v : mesh.triangles()[static_cast<std::size_t>(t)]) {
        if (v == edge.nodes[0] || v == edge.nodes[1])
          continue;
        const Vec2 c = mesh.node(v);
        w[static_cast<std::size_t>(e)] += 0.5 * dot(a - c, b - c) / std::abs(cross(a - c, b - c));
      }
    }
  }
  return w;
}

StiffnessMatrix assemble_p1_laplacian(const Mesh &mesh, const Diffusivity &d) {
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_edges()) * 2 +
               static_cast<std::size_t>(mesh.num_nodes()));
  if (d.is_constant()) {
    const auto w = p1_edge_weights(mesh);
    const double dc = d.constant();
    for (int e = 0; e < mesh.num_edges(); ++e) {
      const Edge &edge = mesh.edges()[static_cast<std::size_t>(e)];
      const double v = dc * w[static_cast<std::size_t>(e)];
      trip.emplace_back(edge.nodes[0], edge.nodes[1], v);
      trip.emplace_back(edge.nodes[1], edge.nodes[0], v);
    }
  } else {
    for (const Triangle &t : mesh.triangles()) {
      const Vec2 g = (mesh.node(t[0]) + mesh.node(t[1]) + mesh.node(t[2])) / 3.0;
      const double dt = d(g);
      for (int l = 0; l < 3; ++l) {
        const int a = t[(l + 1) % 3], b = t[(l + 2) % 3];
        const Vec2 c = mesh.node(t[l]);
        const double v = dt * 0.5 * dot(mesh.node(a) - c, mesh.node(b) - c) /
                         std::abs(cross(mesh.node(a) - c, mesh.node(b) - c));
        trip.emplace_back(a, b, v);
        trip.emplace_back(b, a, v);
      }
    }
  }
  return {with_generator_diagonal(mesh.num_nodes(), trip), true};
}

double bernoulli(double t) {
  if (std::abs(t) < 1e-300)
    return 1.0;
  return t / std::expm1(t);
}

StiffnessMatrix assemble_eafe_stiffness(const Mesh &mesh, const PotentialField &phi,
                                        const Diffusivity &d, int edge_quadrature_order) {
  if (edge_quadrature_order < 1)
    throw std::invalid_argument("edge quadrature order must be at least 1");
  const auto w = p1_edge_weights(mesh);
  const auto gauss = gauss_legendre01(edge_quadrature_order);
  const std::vector<double> nodal = phi.nodal_values(mesh);
  const bool closed_form = phi.is_nodal_table() && d.is_constant();

  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_edges()) * 2 +
               static_cast<std::size_t>(mesh.num_nodes()));
  std::vector<double> vals(gauss.size());
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge &edge = mesh.edges()[static_cast<std::size_t>(e)];
    const int a = edge.nodes[0], b = edge.nodes[1];
    const double pa = nodal[static_cast<std::size_t>(a)];
    const double pb = nodal[static_cast<std::size_t>(b)];
    const double we = w[static_cast<std::size_t>(e)];
    double s_ab, s_ba; // s_ab: hop weight from b into a
    if (closed_form) {
      const double dc = d.constant();
      s_ab = we * dc * bernoulli(pa - pb);
      s_ba = we * dc * bernoulli(pb - pa);
    } else {
      // avg(exp(phi - m)/D) with m the largest sampled value, shared by both
      // directions so that S_ab exp(-phi_b) == S_ba exp(-phi_a).
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < gauss.size(); ++q) {
        vals[q] = phi.value_on_edge(mesh, a, b, gauss[q].s);
        m = std::max(m, vals[q]);
      }
      double avg = 0.0, scale = 1.0;
      if (d.is_constant()) {
        // Normalized by the computed weight sum so that a constant phi gives
        // exactly D w_ij.
        double wsum = 0.0;
        for (std::size_t q = 0; q < gauss.size(); ++q) {
          avg += gauss[q].w * std::exp(vals[q] - m);
          wsum += gauss[q].w;
        }
        avg /= wsum;
        scale = d.constant();
      } else {
        for (std::size_t q = 0; q < gauss.size(); ++q) {
          const Vec2 x = (1.0 - gauss[q].s) * mesh.node(a) + gauss[q].s * mesh.node(b);
          avg += gauss[q].w * std::exp(vals[q] - m) / d(x);
        }
      }
      if (!std::isfinite(avg) || !(avg > 0.0) || !std::isfinite(m)) {
        std::ostringstream os;
        os << "non-finite EAFE edge integrand on edge (" << a << "," << b << ")";
        throw NumericsError(os.str());
      }
      s_ab = we * scale * std::exp(pb - m) / avg;
      s_ba = we * scale * std::exp(pa - m) / avg;
    }
    trip.emplace_back(a, b, s_ab);
    trip.emplace_back(b, a, s_ba);
  }
  return {with_generator_diagonal(mesh.num_nodes(), trip),
          phi.is_constant() && d.is_constant()};
}

StiffnessMatrix assemble_standard_fem_stiffness(const Mesh &mesh, const PotentialField &phi,
                                                const Diffusivity &d) {
  const auto rule = triangle_rule(4);
  const std::vector<double> nodal =
      phi.is_nodal_table() ? phi.nodal_values(mesh) : std::vector<double>{};
  std::vector<Triplet> trip;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Triangle &tri = mesh.triangles()[static_cast<std::size_t>(t)];
    const Vec2 p[3] = {mesh.node(tri[0]), mesh.node(tri[1]), mesh.node(tri[2])};
    const double area = mesh.triangle_area(t);
    Vec2 grad[3];
    for (int l = 0; l < 3; ++l) {
      const Vec2 e = p[(l + 2) % 3] - p[(l + 1) % 3];
      grad[l] = Vec2{-e.y, e.x} / (2.0 * area);
    }
    // Averages over T of D and of D psi_l grad(phi).
    double dint = 0.0;
    Vec2 psi_gphi[3];
    for (const TrianglePoint &q : rule) {
      const Vec2 x = q.l0 * p[0] + q.l1 * p[1] + q.l2 * p[2];
      const double dx = d(x);
      const Vec2 gp = phi.is_nodal_table() ? Vec2{} : phi.gradient(x);
      dint += q.w * dx;
      const double lam[3] = {q.l0, q.l1, q.l2};
      for (int l = 0; l < 3; ++l)
        psi_gphi[l] += (q.w * dx * lam[l]) * gp;
    }
    if (phi.is_nodal_table()) {
      const auto &v = nodal;
      const Vec2 gp = v[static_cast<std::size_t>(tri[0])] * grad[0] +
                      v[static_cast<std::size_t>(tri[1])] * grad[1] +
                      v[static_cast<std::size_t>(tri[2])] * grad[2];
      for (int l = 0; l < 3; ++l)
        psi_gphi[l] = (dint / 3.0) * gp;
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double v = -area * (dint * dot(grad[j], grad[i]) + dot(psi_gphi[j], grad[i]));
        trip.emplace_back(tri[i], tri[j], v);
      }
  }
  SparseMatrix m(mesh.num_nodes(), mesh.num_nodes());
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return {std::move(m), false};
}

MMatrixReport check_m_matrix(const StiffnessMatrix &s) {
  MMatrixReport r;
  std::set<std::array<int, 2>> bad;
  bool any = false;
  for (int j = 0; j < s.matrix.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(s.matrix, j); it; ++it) {
      const int i = static_cast<int>(it.row());
      if (i == j)
        continue;
      r.min_offdiag = any ? std::min(r.min_offdiag, it.value()) : it.value();
      any = true;
      if (it.value() < 0.0)
        bad.insert({std::min(i, j), std::max(i, j)});
    }
  r.violating_edges.assign(bad.begin(), bad.end());
  r.is_m_matrix = bad.empty();
  return r;
}

double RateOperator::max_exit_rate() const {
  return exit_rates.empty() ? 0.0 : *std::max_element(exit_rates.begin(), exit_rates.end());
}

std::size_t RateOperator::num_hops() const {
  std::size_t n = 0;
  for (int j = 0; j < matrix.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(matrix, j); it; ++it)
      if (it.row() != j && it.value() > 0.0)
        ++n;
  return n;
}

RateOperator transition_rate_matrix(const StiffnessMatrix &s, const DualCells &duals,
                                    std::string species, bool allow_nonmonotone) {
  const int n = s.size();
  if (n != duals.size())
    throw std::invalid_argument("stiffness and dual cells differ in size");
  for (double v : duals.volumes)
    if (!(v > 0.0))
      throw NumericsError("dual cell with non-positive volume");
  if (!allow_nonmonotone) {
    const MMatrixReport rep = check_m_matrix(s);
    if (!rep.is_m_matrix) {
      std::ostringstream os;
      os << "stiffness is not an M-matrix: " << rep.violating_edges.size()
         << " negative off-diagonal edge(s), first (" << rep.violating_edges[0][0] << ","
         << rep.violating_edges[0][1] << "), min entry " << rep.min_offdiag;
      throw MMatrixError(os.str(), rep.violating_edges);
    }
  }
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(s.matrix.nonZeros()));
  for (int j = 0; j < n; ++j) {
    const double vj = duals.volumes[static_cast<std::size_t>(j)];
    for (SparseMatrix::InnerIterator it(s.matrix, j); it; ++it) {
      if (it.row() == j)
        continue;
      trip.emplace_back(static_cast<int>(it.row()), j, std::max(it.value(), 0.0) / vj);
    }
  }
  RateOperator l;
  l.matrix = with_generator_diagonal(n, trip);
  l.species = std::move(species);
  l.exit_rates.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
    l.exit_rates[static_cast<std::size_t>(j)] = -l.matrix.coeff(j, j);
  return l;
}

EquilibriumResiduals verify_equilibrium(const RateOperator &l, const std::vector<double> &p) {
  const int n = l.size();
  if (static_cast<int>(p.size()) != n)
    throw std::invalid_argument("distribution and rate operator differ in size");
  EquilibriumResiduals r;
  r.max_exit_rate = l.max_exit_rate();
  std::vector<double> lp(static_cast<std::size_t>(n), 0.0);
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    const double pj = p[static_cast<std::size_t>(j)];
    for (SparseMatrix::InnerIterator it(l.matrix, j); it; ++it) {
      const int i = static_cast<int>(it.row());
      lp[static_cast<std::size_t>(i)] += it.value() * pj;
      if (i == j)
        continue;
      const double flux = it.value() * pj;
      const double back = l.matrix.coeff(j, i) * p[static_cast<std::size_t>(i)];
      r.max_flux = std::max(r.max_flux, flux);
      worst = std::max(worst, std::abs(flux - back));
    }
  }
  for (double v : lp)
    r.stationarity = std::max(r.stationarity, std::abs(v));
  r.detailed_balance = r.max_flux > 0.0 ? worst / r.max_flux : worst;
  return r;
}

} // namespace crddme
