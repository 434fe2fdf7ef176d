#ifndef CRDDME_FIELD_HPP
#define CRDDME_FIELD_HPP

#include <functional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "crddme/geometry.hpp"
#include "crddme/mesh.hpp"

namespace crddme {

struct ConstantPotential {
  double c = 0.0;
};
/// s (x^2 + y^2)
struct QuadraticPotential {
  double scale = 1.0;
};
/// (5/2)(1 - x^2)^2 + 5 y^2
struct TwoWellPotential {};
/// f0 r for r <= R_P, 2 f0 (r - R_P) + f0 R_P beyond.
struct RadialPiecewisePotential {
  double f0 = 1.0;
  double r_p = 4.0;
};
/// c + g . x
struct LinearPotential {
  double c = 0.0;
  Vec2 g;
};
/// Values at mesh nodes, linear along edges.
struct NodalTablePotential {
  std::vector<double> values;
};

/// Dimensionless one-body potential. Drift is -D grad(phi).
class PotentialField {
public:
  using Kind = std::variant<ConstantPotential, QuadraticPotential, TwoWellPotential,
                            RadialPiecewisePotential, LinearPotential,
                            NodalTablePotential>;

  PotentialField() = default;
  PotentialField(Kind kind); // NOLINT: implicit by design
  template <typename T, typename = std::enable_if_t<
                            !std::is_same_v<std::decay_t<T>, PotentialField> &&
                            !std::is_same_v<std::decay_t<T>, Kind> &&
                            std::is_constructible_v<Kind, T>>>
  PotentialField(T &&k) : kind_(std::forward<T>(k)) {} // NOLINT
  const Kind &kind() const { return kind_; }

  bool is_nodal_table() const { return std::holds_alternative<NodalTablePotential>(kind_); }
  bool is_constant() const { return std::holds_alternative<ConstantPotential>(kind_); }

  /// Pointwise value. Throws std::logic_error for nodal tables.
  double value(Vec2 p) const;
  /// Pointwise gradient. Throws std::logic_error for nodal tables; the
  /// radial kind returns 0 at the origin.
  Vec2 gradient(Vec2 p) const;

  /// Value at parameter s in [0,1] along the mesh edge from node a to node b.
  double value_on_edge(const Mesh &mesh, int a, int b, double s) const;
  /// Gradient component along the edge a -> b (per unit length).
  double edge_derivative(const Mesh &mesh, int a, int b, double s) const;

  /// phi at every mesh node. Throws if a nodal table has the wrong length.
  std::vector<double> nodal_values(const Mesh &mesh) const;

  /// Short human-readable description, e.g. "quadratic(1)".
  std::string describe() const;

private:
  Kind kind_{ConstantPotential{}};
};

/// Diffusion coefficient in um^2/s; either constant or a positive field.
class Diffusivity {
public:
  Diffusivity(double d = 1.0); // NOLINT: implicit by design
  explicit Diffusivity(std::function<double(Vec2)> field);

  bool is_constant() const { return !field_; }
  /// The constant value; throws std::logic_error for a spatial field.
  double constant() const;
  double operator()(Vec2 p) const;

private:
  double d_ = 1.0;
  std::function<double(Vec2)> field_;
};

/// Discrete equilibrium P_i = exp(-phi_i)|V_i| / Z_hat.
struct GibbsBoltzmann {
  std::vector<double> p;
  std::vector<double> log_p;
  /// log of the unshifted discrete partition function Z_hat.
  double log_z = 0.0;
  double z() const;
};

GibbsBoltzmann discrete_gibbs_boltzmann(const std::vector<double> &volumes,
                                        const std::vector<double> &nodal_phi);
GibbsBoltzmann discrete_gibbs_boltzmann(const Mesh &mesh, const DualCells &duals,
                                        const PotentialField &field);

/// Z = integral of exp(-phi) over the triangulated domain. `log_z` avoids
/// overflow when phi is large.
struct PartitionFunction {
  double z = 0.0;
  double log_z = 0.0;
};

PartitionFunction continuous_partition_function(const Mesh &mesh,
                                                const PotentialField &field,
                                                int degree = 4);

} // namespace crddme

#endif
