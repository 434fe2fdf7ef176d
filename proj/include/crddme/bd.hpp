#ifndef CRDDME_BD_HPP
#define CRDDME_BD_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "crddme/field.hpp"
#include "crddme/mesh.hpp"
#include "crddme/reactions.hpp"
#include "crddme/ssa.hpp"

namespace crddme {

struct BDSpecies {
  std::string name;
  double d = 1.0; // um^2/s
  PotentialField potential;
};

struct BDBimolecular {
  int a = 0;
  int b = 1;
  int c = -1; // < 0: annihilation
  DoiKernel kernel;
  /// Absent for irreversible reactions.
  std::optional<DissociationMode> dissociation;
};

struct BDConfig {
  Shape domain;
  std::vector<BDSpecies> species;
  std::optional<BDBimolecular> bimolecular;
  std::vector<LinearReaction> linear;
  double dt = 1e-10;
  /// Largest number of dt steps merged into one while no A-B pair can
  /// reach the reaction radius; 1 disables merging.
  int max_skip = 10000;
  /// Bound on (total reaction rate) * merged step, so that first-order
  /// events stay resolved in time.
  double max_event_probability = 0.02;
  /// Bound on D * merged step * |Hess phi|, so that drift errors of merged
  /// steps stay at the level of single steps in stiff potentials.
  double max_drift_change = 0.01;
  /// Refinement level of the mesh used for the partition functions.
  int partition_level = 5;

  void validate() const;
};

struct BDState {
  double t = 0.0;
  /// positions[s] lists the particles of species s.
  std::vector<std::vector<Vec2>> positions;
  int count(int s) const { return static_cast<int>(positions[static_cast<std::size_t>(s)].size()); }
};

struct BDInitial {
  int species = 0;
  int count = 1;
  /// Uniform in the domain restricted to `region` when set; at `point` when
  /// given.
  std::function<bool(Vec2)> region;
  std::optional<Vec2> point;
};

struct BDRunOptions {
  double t_end = 1.0;
  std::vector<double> sample_times;
  std::function<void(std::size_t, const BDState &)> observer;
  bool stop_on_association = false;
};

struct BDResult {
  BDState final_state;
  double first_association = std::numeric_limits<double>::infinity();
  std::uint64_t steps = 0;
  std::uint64_t dt_units = 0;
};

/// Euler-Maruyama Brownian dynamics with specular reflection and Doi
/// reactions. One instance may run many trajectories.
class BDSimulator {
public:
  explicit BDSimulator(BDConfig config);

  const BDConfig &config() const { return cfg_; }
  BDState sample_initial(const std::vector<BDInitial> &initial, Rng &rng) const;
  BDResult run(BDState state, std::uint64_t seed, const BDRunOptions &opts) const;

  /// Specular reflection into the domain; throws NumericsError after 100
  /// reflections.
  Vec2 reflect(Vec2 p) const;
  bool inside(Vec2 p) const;
  /// Detailed-balance unbinding rate at z (0 without dissociation).
  double unbinding_rate(Vec2 z) const;

private:
  BDConfig cfg_;
  std::optional<ContinuousUnbinding> unbinding_;
  std::vector<double> curvature_; // per species, max |Hess phi| on a probe grid
  /// Upper bound of the unbinding rate used for thinning.
  double rate_bound_ = 0.0;
  double fixed_rate_ = 0.0;
  bool detailed_balance_ = false;
};

struct BDEnsembleResult {
  std::vector<double> binding_times;                 // [r]
  std::vector<std::vector<std::vector<int>>> totals; // [r][t][s]
  std::vector<std::uint64_t> steps;                  // [r]
};

/// Realization r uses split_seed(master_seed, r) for the initial state and
/// splitmix64 of it for the trajectory, like run_ensemble.
BDEnsembleResult run_bd_ensemble(const BDSimulator &sim, const std::vector<BDInitial> &initial,
                                 std::size_t n, std::uint64_t master_seed, double t_end,
                                 const EnsembleOutputs &outputs);

} // namespace crddme

#endif
