#ifndef CRDDME_EAFE_HPP
#define CRDDME_EAFE_HPP

#include <array>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "crddme/errors.hpp"
#include "crddme/field.hpp"
#include "crddme/mesh.hpp"

namespace crddme {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Sign convention: all stiffness matrices here discretize the operator
/// div(D (grad p + p grad phi)) itself, so off-diagonals are >= 0 on Delaunay
/// meshes and every column sums to zero. The classical FEM "stiffness" of
/// -Laplace is the negative of assemble_p1_laplacian.
struct StiffnessMatrix {
  SparseMatrix matrix;
  bool symmetric = false;

  int size() const { return static_cast<int>(matrix.rows()); }
  double operator()(int i, int j) const { return matrix.coeff(i, j); }
};

/// Cotangent edge weights 0.5 (cot a + cot b), indexed like mesh.edges().
std::vector<double> p1_edge_weights(const Mesh &mesh);

/// D-scaled P1 Laplacian stiffness. Pattern is the edge adjacency plus the
/// diagonal. A spatial D is sampled at triangle centroids.
StiffnessMatrix assemble_p1_laplacian(const Mesh &mesh, const Diffusivity &d = 1.0);

/// t / (exp(t) - 1), with B(0) = 1.
double bernoulli(double t);

/// Edge-averaged stiffness:
///   S_ij = w_ij / avg_{E_ij}(exp(phi - phi_j) / D),   i != j,
///   S_jj = -sum_{k != j} S_kj.
/// The edge average uses `edge_quadrature_order` Gauss points (the same
/// symmetric points for both directions); nodal-table potentials with
/// constant D use the closed Bernoulli form.
StiffnessMatrix assemble_eafe_stiffness(const Mesh &mesh, const PotentialField &phi,
                                        const Diffusivity &d,
                                        int edge_quadrature_order = 4);

/// Galerkin P1 discretization of the same operator, without edge averaging.
/// Diagnostic only: its off-diagonals turn negative for strong drift.
StiffnessMatrix assemble_standard_fem_stiffness(const Mesh &mesh, const PotentialField &phi,
                                                const Diffusivity &d);

struct MMatrixReport {
  bool is_m_matrix = true;
  /// Undirected node pairs (i < j) with a negative off-diagonal entry.
  std::vector<std::array<int, 2>> violating_edges;
  /// Smallest off-diagonal entry (0 if the matrix is diagonal).
  double min_offdiag = 0.0;
};

MMatrixReport check_m_matrix(const StiffnessMatrix &s);

class MMatrixError : public NumericsError {
public:
  MMatrixError(const std::string &what, std::vector<std::array<int, 2>> edges)
      : NumericsError(what), edges_(std::move(edges)) {}
  const std::vector<std::array<int, 2>> &edges() const { return edges_; }

private:
  std::vector<std::array<int, 2>> edges_;
};

/// Jump-process generator L = S Lambda^{-1}: (L)_ij = S_ij / |V_j| is the
/// rate of a hop from voxel j to voxel i. Columns sum to zero.
struct RateOperator {
  SparseMatrix matrix;
  std::vector<double> exit_rates;
  std::string species;

  int size() const { return static_cast<int>(matrix.rows()); }
  double max_exit_rate() const;
  /// Number of strictly positive off-diagonal rates.
  std::size_t num_hops() const;
};

/// Throws MMatrixError if S has a negative off-diagonal, unless
/// allow_nonmonotone is set; then negative entries are clamped to zero
/// (diagnostic use only).
RateOperator transition_rate_matrix(const StiffnessMatrix &s, const DualCells &duals,
                                    std::string species = {},
                                    bool allow_nonmonotone = false);

struct EquilibriumResiduals {
  /// max_i |(L p)_i|
  double stationarity = 0.0;
  /// max_ij |L_ij p_j - L_ji p_i| divided by the largest flux L_ij p_j.
  double detailed_balance = 0.0;
  double max_exit_rate = 0.0;
  double max_flux = 0.0;
};

EquilibriumResiduals verify_equilibrium(const RateOperator &l, const std::vector<double> &p);

} // namespace crddme

#endif
