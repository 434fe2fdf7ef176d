#ifndef CRDDME_REACTIONS_HPP
#define CRDDME_REACTIONS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "crddme/field.hpp"
#include "crddme/mesh.hpp"
#include "crddme/random.hpp"

namespace crddme {

/// Doi association kernel lambda 1{|x-y| <= r_b} delta(z - gamma x - (1-gamma) y).
struct DoiKernel {
  double lambda = 0.0; // 1/s
  double r_b = 0.0;    // um
  double gamma = 0.5;

  void validate() const;
};

struct PlacedRate {
  int k;
  double rate;
};

/// kappa+_ij with its placement split kappa+_ijk, stored in
/// AssociationTable::placements[begin, end).
struct AssociationPair {
  int i; // voxel of the A molecule
  int j; // voxel of the B molecule
  double rate;
  int begin;
  int end;
};

struct AssociationTable {
  int n_voxels = 0;
  /// Sorted by (i, j). rate == floating sum of its placements in stored order.
  std::vector<AssociationPair> pairs;
  std::vector<PlacedRate> placements;

  /// kappa+_ij, 0 if the pair is absent.
  double rate(int i, int j) const;
  /// Index into pairs, or -1.
  int find(int i, int j) const;
};

struct TabulationOptions {
  int samples_per_pair = 10000;
  std::uint64_t seed = 1;
  /// Product sampling of V_i x V_j when pi r_b^2 >= median |V|; otherwise
  /// x in V_i, y = x + w with w uniform in the reaction disk.
  enum class Method { automatic, product, ball } method = Method::automatic;
};

/// kappa+_ij = lambda / (|V_i||V_j|) * integral over V_i x V_j of 1{|x-y|<=r_b},
/// with each accepted sample's placement point located in a dual cell k.
/// The table for (j, i) reuses the (i, j) samples mirrored, so with gamma = 1/2
/// kappa+_ij == kappa+_ji and kappa+_ijk == kappa+_jik exactly. Deterministic
/// in (mesh, kernel, options). `warnings` receives a note when the table is
/// empty.
AssociationTable tabulate_association(const Mesh &mesh, const DualCells &duals,
                                      const DoiKernel &kernel,
                                      const TabulationOptions &opts = {},
                                      std::vector<std::string> *warnings = nullptr);

struct DissociationEntry {
  int i;
  int j;
  double rate;
};

/// kappa-_ijk grouped by the complex voxel k in entries[begin[k], begin[k+1]).
struct DissociationTable {
  int n_voxels = 0;
  std::vector<int> begin;
  std::vector<DissociationEntry> entries;
  /// kappa-_k == floating sum of the entries of k in stored order.
  std::vector<double> total;
};

struct DetailedBalanceMode {
  double k_d = 1.0;
};
struct FixedRateMode {
  double mu = 0.0;
};
using DissociationMode = std::variant<DetailedBalanceMode, FixedRateMode>;

/// Detailed-balance mode:
///   kappa-_ijk = K_d (P_A,i P_B,j / P_C,k) kappa+_ijk
/// with P the discrete Gibbs-Boltzmann distributions (equivalently
/// K_d Z_C/(Z_A Z_B) |V_i||V_j|/|V_k| exp(phiC_k - phiA_i - phiB_j) kappa+_ijk).
/// Voxels with no incoming placement get rate 0.
/// Fixed-rate mode: kappa-_k = mu, split over (i, j) in proportion to
/// P_A,i P_B,j kappa+_ijk; a voxel with no incoming placement releases both
/// products into itself.
DissociationTable tabulate_dissociation(const AssociationTable &assoc,
                                        const std::vector<double> &volumes,
                                        const std::vector<double> &phi_a,
                                        const std::vector<double> &phi_b,
                                        const std::vector<double> &phi_c,
                                        const DissociationMode &mode);

struct ReactionTables {
  DoiKernel kernel;
  DissociationMode mode;
  TabulationOptions options;
  AssociationTable association;
  DissociationTable dissociation;

  /// Checksum over all stored rates (FNV-1a of the bit patterns).
  std::uint64_t checksum() const;
};

/// Text persistence: one JSON header line, then "A i j k rate" and
/// "D i j k rate" lines with 17 significant digits.
void write_tables(std::ostream &out, const ReactionTables &tables,
                  std::uint64_t mesh_hash);
/// Reads tables written by write_tables. Throws if the checksum does not match
/// or the stored mesh hash differs from `expected_mesh_hash` (when given).
ReactionTables read_tables(std::istream &in,
                           std::optional<std::uint64_t> expected_mesh_hash = {});

/// Continuous unbinding rate and product sampler for particle simulations:
///   kappa-(z) = K_d lambda Z_C/(Z_A Z_B) exp(phiC(z))
///               * integral_{|w| <= r_b} exp(-phiA(z + (1-g) w) - phiB(z - g w)) dw
/// restricted to product positions inside the domain when a predicate is set.
class ContinuousUnbinding {
public:
  struct Options {
    int radial_points = 6;
    int angular_points = 24;
    std::function<bool(Vec2)> inside;
  };

  ContinuousUnbinding(DoiKernel kernel, PotentialField phi_a, PotentialField phi_b,
                      PotentialField phi_c, double log_z_a, double log_z_b,
                      double log_z_c, double k_d, Options opts);

  double rate(Vec2 z) const;

  /// Draws product positions (x, y) with x - y = w distributed proportionally
  /// to the integrand; gamma x + (1-gamma) y == z.
  std::pair<Vec2, Vec2> sample(Vec2 z, Rng &rng) const;

  /// Integrand value exp(phiC(z) - phiA(x) - phiB(y)) for separation w, or 0
  /// if a product falls outside the domain.
  double integrand(Vec2 z, Vec2 w) const;

private:
  struct Node {
    Vec2 w;
    double weight;
  };

  DoiKernel kernel_;
  PotentialField phi_a_, phi_b_, phi_c_;
  double prefactor_; // K_d lambda Z_C / (Z_A Z_B)
  std::function<bool(Vec2)> inside_;
  std::vector<Node> nodes_;
};

} // namespace crddme

#endif
