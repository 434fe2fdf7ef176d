#ifndef CRDDME_FPE_ORACLE_HPP
#define CRDDME_FPE_ORACLE_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crddme/eafe.hpp"
#include "crddme/field.hpp"
#include "crddme/mesh.hpp"
#include "crddme/reactions.hpp"
#include "crddme/ssa.hpp"

namespace crddme {

// ---------------------------------------------------------------------------
// Steady drift-diffusion-reaction problem
//   -div(D (grad rho + rho grad phi)) + rho = f,  zero flux on the boundary,
// discretized as (-S + M) rho = F with the EAFE stiffness S and lumped mass M.

struct SteadySolveSpec {
  PotentialField potential;
  Diffusivity d;
  std::function<double(Vec2)> forcing;
  /// Optional analytic solution, used only for reporting errors.
  std::function<double(Vec2)> exact;
  int forcing_degree = 6;
};

struct SteadySolution {
  std::vector<double> rho;
  /// ||(-S+M) rho - F||_inf / (||-S+M||_inf ||rho||_inf + ||F||_inf)
  double relative_residual = 0.0;
};

SteadySolution solve_steady_state(const Mesh &mesh, const SteadySolveSpec &spec);

/// L2 norm of the P1 interpolant of nodal values.
double p1_l2_norm(const Mesh &mesh, const std::vector<double> &values);

/// L2 distance between the P1 interpolant of `values` and a function,
/// integrated with a triangle rule of the given degree.
double p1_l2_error(const Mesh &mesh, const std::vector<double> &values,
                   const std::function<double(Vec2)> &exact, int degree = 6);

struct ConvergenceLevel {
  int nodes = 0;
  /// ||rho_N - I rho_2N||_2 on the coarse mesh; absent on the finest level.
  std::optional<double> difference;
  /// log2(e_N / e_2N); absent when either error is missing or zero.
  std::optional<double> rate;
  /// Error against the exact solution when one was supplied.
  std::optional<double> exact_error;
};

/// Successive-level errors and empirical rates. meshes[l+1] must be a uniform
/// refinement of meshes[l] (its first N_l nodes coincide with those of
/// meshes[l]); throws std::invalid_argument otherwise.
std::vector<ConvergenceLevel> error_report(const std::vector<Mesh> &meshes,
                                           const std::vector<std::vector<double>> &solutions,
                                           const std::function<double(Vec2)> &exact = {});

// ---------------------------------------------------------------------------
// Two-particle generator

enum class TwoParticleMode { reversible, annihilation };

/// Generator of the one A + one B (or one C) jump process. Column-oriented:
/// Q(target, source) is the transition rate, the diagonal holds minus the
/// exit rate. Unbound state (i, j) has index i * N + j, bound state k has
/// index N^2 + k (reversible mode only).
struct TwoParticleGenerator {
  SparseMatrix q;
  int n_voxels = 0;
  TwoParticleMode mode = TwoParticleMode::reversible;

  int size() const { return static_cast<int>(q.rows()); }
  int unbound_index(int i, int j) const { return i * n_voxels + j; }
  int bound_index(int k) const { return n_voxels * n_voxels + k; }
};

TwoParticleGenerator build_two_particle_generator(const RateOperator &la, const RateOperator &lb,
                                                  const RateOperator *lc,
                                                  const AssociationTable &assoc,
                                                  const DissociationTable *dissoc,
                                                  TwoParticleMode mode);

struct OracleOptions {
  std::size_t state_cap = 20000;
  /// Absolute local error per step for transient solves.
  double tolerance = 1e-8;
};

/// Probability vector with Q p = 0 and sum p = 1. Throws NumericsError when
/// the chain is reducible or the residual exceeds 1e-10.
std::vector<double> stationary_distribution(const SparseMatrix &q,
                                            const OracleOptions &opts = {});

/// p(t) for each t in t_grid (sorted, >= 0) with dp/dt = Q p, p(0) = p0.
/// Adaptive TR-BDF2 with per-step error control.
std::vector<std::vector<double>> transient_solve(const SparseMatrix &q, std::vector<double> p0,
                                                 const std::vector<double> &t_grid,
                                                 const OracleOptions &opts = {});

/// Mean time to absorption from the annihilation generator: solves
/// Q^T tau = -1 and returns sum_s p0_s tau_s.
double mean_binding_time(const TwoParticleGenerator &gen, const std::vector<double> &p0,
                         const OracleOptions &opts = {});

/// Initial distribution with A and B independently uniform by area:
/// P0(i, j) = |V_i||V_j| / |Omega|^2.
std::vector<double> uniform_pair_distribution(const std::vector<double> &volumes);

// ---------------------------------------------------------------------------
// Multiparticle master equation by enumeration

struct MasterEquation {
  /// states[s] flattens counts[species][voxel].
  std::vector<std::vector<int>> states;
  SparseMatrix q;
  int n_species = 0;
  int n_voxels = 0;

  SystemState state(std::size_t s) const;
  /// Index of a state, or -1.
  long index_of(const SystemState &state) const;
};

/// Enumerates every state reachable from `initial` under the model's
/// transitions and builds the generator. Throws NumericsError past the cap.
MasterEquation build_master_equation(const ReactionModel &model, const SystemState &initial,
                                     const OracleOptions &opts = {});

} // namespace crddme

#endif
