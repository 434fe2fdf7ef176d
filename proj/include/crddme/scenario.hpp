#ifndef CRDDME_SCENARIO_HPP
#define CRDDME_SCENARIO_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crddme/bd.hpp"
#include "crddme/eafe.hpp"
#include "crddme/fpe_oracle.hpp"
#include "crddme/reactions.hpp"
#include "crddme/ssa.hpp"

namespace crddme {

struct DomainConfig {
  std::string shape = "disk"; // square | disk | mesh
  Vec2 center;
  /// Side length (square) or radius (disk).
  double size = 1.0;
  int level = 1;
  std::string mesh_path;

  bool operator==(const DomainConfig &) const = default;
};

struct PotentialConfig {
  std::string kind = "constant"; // constant | quadratic | two_well | radial_piecewise | linear | nodal_table
  double c = 0.0;
  double scale = 1.0;
  double f0 = 1.0;
  double r_p = 4.0;
  Vec2 g;
  std::vector<double> values;

  bool operator==(const PotentialConfig &) const = default;
  PotentialField build() const;
};

struct InitialConfig {
  std::string kind = "uniform"; // uniform | per_voxel | at_point
  int count = 1;
  /// Region |x - domain center| in (r_min, r_max]; negative bounds are off.
  double r_min = -1.0;
  double r_max = -1.0;
  Vec2 point;

  bool operator==(const InitialConfig &) const = default;
  bool in_region(Vec2 p, Vec2 center) const;
};

struct SpeciesConfig {
  std::string name;
  double diffusivity = 1.0;
  PotentialConfig potential;
  std::vector<InitialConfig> initial;

  bool operator==(const SpeciesConfig &) const = default;
};

struct BimolecularConfig {
  std::string a, b, c; // c empty: annihilation
  double lambda = 0.0;
  double r_b = 0.0;
  double gamma = 0.5;
  std::string dissociation = "none"; // none | detailed_balance | fixed_rate
  double k_d = 1.0;
  double mu = 0.0;

  bool operator==(const BimolecularConfig &) const = default;
};

struct LinearConfig {
  std::string from, to;
  double rate = 0.0;
  bool operator==(const LinearConfig &) const = default;
};

struct TabulationConfig {
  int samples_per_pair = 2000;
  std::uint64_t seed = 1;
  std::string method = "automatic"; // automatic | product | ball
  bool operator==(const TabulationConfig &) const = default;
};

struct RunConfig {
  double t_end = 1.0;
  std::size_t n_realizations = 1000;
  std::uint64_t master_seed = 1;
  bool binding_times = false;
  std::vector<double> t_grid;
  std::vector<double> snapshot_times;
  bool operator==(const RunConfig &) const = default;
};

struct BDRunConfig {
  double dt = 1e-10;
  int max_skip = 10000;
  bool operator==(const BDRunConfig &) const = default;
};

/// Steady-state accuracy study: manufactured solution exp(-phi) g.
struct SteadyConfig {
  std::string profile = "one"; // one | cos2pi
  int min_level = 0;
  int max_level = 5;
  bool operator==(const SteadyConfig &) const = default;
};

struct ScenarioConfig {
  std::string name;
  DomainConfig domain;
  std::vector<SpeciesConfig> species;
  std::optional<BimolecularConfig> bimolecular;
  std::vector<LinearConfig> linear;
  TabulationConfig tabulation;
  RunConfig run;
  BDRunConfig bd;
  std::optional<SteadyConfig> steady;

  bool operator==(const ScenarioConfig &) const = default;

  int species_index(const std::string &name, const std::string &path) const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const ScenarioConfig &c);
/// Parses and validates; missing optional fields take their defaults.
ScenarioConfig scenario_from_json(const nlohmann::json &j);
ScenarioConfig load_scenario(const std::string &path);

/// Names of the built-in scenarios.
std::vector<std::string> builtin_scenarios();
/// Throws ConfigError for an unknown name.
ScenarioConfig builtin_scenario(const std::string &name);

/// FNV-1a over the canonical JSON text.
std::uint64_t config_hash(const ScenarioConfig &c);

Shape domain_shape(const DomainConfig &d);
Mesh build_mesh(const DomainConfig &d);

/// Everything the SSA needs for one scenario on one mesh.
struct BuiltModel {
  Mesh mesh;
  DualCells duals;
  std::vector<std::vector<double>> nodal_phi; // per species
  std::shared_ptr<ReactionModel> model;
  std::optional<ReactionTables> tables;
  std::vector<InitialPlacement> initial;
  std::vector<std::string> warnings;
  /// Path of the cached table file, empty when no cache was used.
  std::string table_file;
  bool table_cache_hit = false;
};

std::vector<RateOperator> build_hops(const ScenarioConfig &c, const Mesh &mesh,
                                     const DualCells &duals);

/// Cache key of the reaction tables: (mesh hash, kernel, dissociation,
/// tabulation options).
std::uint64_t table_key(const ScenarioConfig &c, std::uint64_t mesh_hash);

/// Builds operators, tables and initial placements. With a cache directory,
/// tables are read from or written to `<dir>/tables-<key>.txt`.
BuiltModel build_model(const ScenarioConfig &c, const Mesh &mesh,
                       const std::string &cache_dir = {});

BDConfig build_bd_config(const ScenarioConfig &c);
/// BD initial particles. per_voxel counts are converted to count * (number
/// of mesh voxels whose node lies in the region), placed uniformly in it.
std::vector<BDInitial> build_bd_initial(const ScenarioConfig &c, const Mesh &mesh);

/// Steady solve spec of an accuracy-study scenario (species[0]).
SteadySolveSpec build_steady_spec(const ScenarioConfig &c);

} // namespace crddme

#endif
