#ifndef CRDDME_SSA_HPP
#define CRDDME_SSA_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crddme/eafe.hpp"
#include "crddme/reactions.hpp"
#include "crddme/random.hpp"

namespace crddme {

/// Per-voxel linear conversion `from -> to` with rate constant `rate` (1/s).
struct LinearReaction {
  int from = 0;
  int to = 0;
  double rate = 0.0;
};

/// A + B -> C (or A + B -> nothing when c < 0), reversible when dissociation
/// is set.
struct BimolecularReaction {
  int a = 0;
  int b = 1;
  int c = -1;
  std::shared_ptr<const AssociationTable> association;
  std::shared_ptr<const DissociationTable> dissociation;
};

/// Everything a CRDDME realization needs. All operators share one mesh.
struct ReactionModel {
  std::vector<std::string> species;
  std::vector<RateOperator> hops; // one per species
  std::optional<BimolecularReaction> bimolecular;
  std::vector<LinearReaction> linear;

  int n_voxels() const { return hops.empty() ? 0 : hops.front().size(); }
  int n_species() const { return static_cast<int>(species.size()); }
  int species_index(const std::string &name) const;
  void validate() const;
};

struct SystemState {
  double t = 0.0;
  /// counts[s][v]
  std::vector<std::vector<int>> counts;

  int total(int s) const;
  bool operator==(const SystemState &) const = default;
};

enum class ChannelKind : std::uint8_t { hop, association, dissociation, linear };

struct Channel {
  ChannelKind kind;
  int species; // hop / linear: source species
  int from;    // hop: source voxel; association: pair index; dissociation,
               // linear: voxel
  int to;      // hop: target voxel; linear: reaction index
  double rate; // base rate multiplying the substrate counts
};

/// Channel list with the placement samplers and the (species, voxel) ->
/// channel reader lists that drive propensity updates.
class ChannelTable {
public:
  explicit ChannelTable(std::shared_ptr<const ReactionModel> model);

  const ReactionModel &model() const { return *model_; }
  const std::vector<Channel> &channels() const { return channels_; }
  std::size_t size() const { return channels_.size(); }
  /// Channels whose propensity reads counts[s][v].
  std::span<const int> readers(int s, int v) const;

  double propensity(int c, const SystemState &state) const;

  /// Voxel of the complex for association pair p (alias draw).
  int draw_association_placement(int pair, Rng &rng) const;
  /// (i, j) product voxels for a dissociation in voxel k (alias draw).
  std::pair<int, int> draw_dissociation_placement(int k, Rng &rng) const;

private:
  struct Alias {
    std::vector<double> prob;
    std::vector<int> alias;
    std::vector<int> begin;
    int draw(int group, Rng &rng) const;
    void add_group(const std::vector<double> &weights);
  };

  std::shared_ptr<const ReactionModel> model_;
  std::vector<Channel> channels_;
  std::vector<int> reader_begin_;
  std::vector<int> reader_items_;
  Alias assoc_alias_;
  Alias dissoc_alias_;
};

struct Event {
  double t;
  ChannelKind kind;
  int species;
  int v0; // hop: from; association: A voxel; dissociation: complex voxel; linear: voxel
  int v1; // hop: to; association: B voxel; dissociation: A voxel
  int v2; // association: complex voxel (-1 when annihilating); dissociation: B voxel
};

struct EventLog {
  std::vector<Event> events;
  std::vector<SystemState> snapshots;

  /// Applies every event to `initial` and returns the final state.
  SystemState replay(const ReactionModel &model, SystemState initial) const;
  /// Replays and checks each snapshot along the way; false on mismatch.
  bool replay_matches_snapshots(const ReactionModel &model, SystemState initial) const;
};

struct SimulationOptions {
  double t_end = std::numeric_limits<double>::infinity();
  /// Sorted observation times; the state at each is passed to `observer`
  /// and, if record_snapshots is set, stored in the log.
  std::vector<double> sample_times;
  std::function<void(std::size_t, const SystemState &)> observer;
  bool record_events = false;
  bool record_snapshots = false;
  bool stop_on_association = false;
  std::uint64_t max_events = std::numeric_limits<std::uint64_t>::max();
};

struct SimulationResult {
  SystemState final_state;
  EventLog log;
  std::uint64_t n_events = 0;
  /// Time of the first association, +inf if none occurred.
  double first_association = std::numeric_limits<double>::infinity();
};

/// Next Reaction Method (Gibson-Bruck). One instance owns the per-channel
/// firing times and may run many realizations in sequence.
class Simulator {
public:
  explicit Simulator(std::shared_ptr<const ChannelTable> table);

  SimulationResult run(const SystemState &initial, std::uint64_t seed,
                       const SimulationOptions &opts);

private:
  void set_propensity(int c, double a_new, double t, Rng &rng, bool fired);
  void heap_push(int c);
  void heap_remove(int c);
  void heap_fix(int c);
  void sift_up(std::size_t i);
  void sift_down(std::size_t i);
  void reset();

  std::shared_ptr<const ChannelTable> table_;
  std::vector<double> a_;
  std::vector<double> tau_;
  std::vector<int> pos_;
  std::vector<int> heap_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

// ---------------------------------------------------------------------------
// Initial conditions and ensembles

struct InitialPlacement {
  enum class Kind { uniform_by_area, per_voxel, at_voxel } kind = Kind::uniform_by_area;
  int species = 0;
  int count = 1;
  int voxel = 0;
  /// per_voxel: voxels receiving `count` copies; uniform_by_area: voxels
  /// to choose from. All voxels when empty.
  std::vector<int> voxels;
};

SystemState sample_initial_state(const ReactionModel &model, const std::vector<double> &volumes,
                                 const std::vector<InitialPlacement> &placements, Rng &rng);

struct EnsembleOutputs {
  bool binding_times = false;
  /// Per-species totals at each time of t_grid.
  std::vector<double> t_grid;
  /// Per-voxel counts at each time of snapshot_times (memory heavy).
  std::vector<double> snapshot_times;
};

struct EnsembleResult {
  std::vector<double> binding_times;                       // [r]
  std::vector<std::vector<std::vector<int>>> totals;       // [r][t][s]
  std::vector<std::vector<SystemState>> snapshots;          // [r][t]
  std::vector<std::uint64_t> n_events;                     // [r]
};

/// Runs n realizations; realization r uses split_seed(master_seed, r) both
/// for its initial state and its trajectory. Results are ordered by r.
EnsembleResult run_ensemble(std::shared_ptr<const ChannelTable> table,
                            const std::vector<double> &volumes,
                            const std::vector<InitialPlacement> &initial, std::size_t n,
                            std::uint64_t master_seed, double t_end,
                            const EnsembleOutputs &outputs);

} // namespace crddme

#endif
