#include "crddme/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "crddme/errors.hpp"
#include "crddme/quadrature.hpp"

namespace crddme {

namespace {

template <class... Ts> struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void nodal_point_query() {
  throw std::logic_error("nodal_table potential has no pointwise value or gradient; "
                         "query it along mesh edges");
}

} // namespace

PotentialField::PotentialField(Kind kind) : kind_(std::move(kind)) {}

double PotentialField::value(Vec2 p) const {
  return std::visit(
      overloaded{
          [](const ConstantPotential &k) { return k.c; },
          [&](const QuadraticPotential &k) { return k.scale * (p.x * p.x + p.y * p.y); },
          [&](const TwoWellPotential &) {
            const double u = 1.0 - p.x * p.x;
            return 2.5 * u * u + 5.0 * p.y * p.y;
          },
          [&](const RadialPiecewisePotential &k) {
            const double r = norm(p);
            return r <= k.r_p ? k.f0 * r : 2.0 * k.f0 * (r - k.r_p) + k.f0 * k.r_p;
          },
          [&](const LinearPotential &k) { return k.c + dot(k.g, p); },
          [](const NodalTablePotential &) -> double { nodal_point_query(); },
      },
      kind_);
}

Vec2 PotentialField::gradient(Vec2 p) const {
  return std::visit(
      overloaded{
          [](const ConstantPotential &) { return Vec2{}; },
          [&](const QuadraticPotential &k) { return 2.0 * k.scale * p; },
          [&](const TwoWellPotential &) {
            return Vec2{-10.0 * p.x * (1.0 - p.x * p.x), 10.0 * p.y};
          },
          [&](const RadialPiecewisePotential &k) {
            const double r = norm(p);
            if (r == 0.0)
              return Vec2{};
            const double slope = r <= k.r_p ? k.f0 : 2.0 * k.f0;
            return (slope / r) * p;
          },
          [](const LinearPotential &k) { return k.g; },
          [](const NodalTablePotential &) -> Vec2 { nodal_point_query(); },
      },
      kind_);
}

double PotentialField::value_on_edge(const Mesh &mesh, int a, int b, double s) const {
  if (const auto *t = std::get_if<NodalTablePotential>(&kind_)) {
    const double va = t->values.at(static_cast<std::size_t>(a));
    const double vb = t->values.at(static_cast<std::size_t>(b));
    return (1.0 - s) * va + s * vb;
  }
  return value((1.0 - s) * mesh.node(a) + s * mesh.node(b));
}

double PotentialField::edge_derivative(const Mesh &mesh, int a, int b, double s) const {
  const Vec2 pa = mesh.node(a), pb = mesh.node(b);
  const double len = distance(pa, pb);
  if (const auto *t = std::get_if<NodalTablePotential>(&kind_))
    return (t->values.at(static_cast<std::size_t>(b)) -
            t->values.at(static_cast<std::size_t>(a))) /
           len;
  return dot(gradient((1.0 - s) * pa + s * pb), (pb - pa) / len);
}

std::vector<double> PotentialField::nodal_values(const Mesh &mesh) const {
  if (const auto *t = std::get_if<NodalTablePotential>(&kind_)) {
    if (static_cast<int>(t->values.size()) != mesh.num_nodes())
      throw ConfigError("nodal_table has " + std::to_string(t->values.size()) +
                        " values for a mesh with " + std::to_string(mesh.num_nodes()) +
                        " nodes");
    return t->values;
  }
  std::vector<double> v(static_cast<std::size_t>(mesh.num_nodes()));
  for (int i = 0; i < mesh.num_nodes(); ++i)
    v[static_cast<std::size_t>(i)] = value(mesh.node(i));
  return v;
}

std::string PotentialField::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const ConstantPotential &k) { os << "constant(" << k.c << ")"; },
                 [&](const QuadraticPotential &k) { os << "quadratic(" << k.scale << ")"; },
                 [&](const TwoWellPotential &) { os << "two_well"; },
                 [&](const RadialPiecewisePotential &k) {
                   os << "radial_piecewise(" << k.f0 << "," << k.r_p << ")";
                 },
                 [&](const LinearPotential &k) {
                   os << "linear(" << k.c << "," << k.g.x << "," << k.g.y << ")";
                 },
                 [&](const NodalTablePotential &k) {
                   os << "nodal_table[" << k.values.size() << "]";
                 },
             },
             kind_);
  return os.str();
}

Diffusivity::Diffusivity(double d) : d_(d) {
  if (!(d > 0.0) || !std::isfinite(d))
    throw ConfigError("diffusivity must be positive and finite");
}

Diffusivity::Diffusivity(std::function<double(Vec2)> field) : field_(std::move(field)) {
  if (!field_)
    throw ConfigError("empty diffusivity field");
}

double Diffusivity::constant() const {
  if (field_)
    throw std::logic_error("diffusivity is not constant");
  return d_;
}

double Diffusivity::operator()(Vec2 p) const {
  if (!field_)
    return d_;
  const double d = field_(p);
  if (!(d > 0.0) || !std::isfinite(d))
    throw NumericsError("diffusivity not positive at (" + std::to_string(p.x) + "," +
                        std::to_string(p.y) + ")");
  return d;
}

double GibbsBoltzmann::z() const { return std::exp(log_z); }

GibbsBoltzmann discrete_gibbs_boltzmann(const std::vector<double> &volumes,
                                        const std::vector<double> &nodal_phi) {
  if (nodal_phi.size() != volumes.size())
    throw std::invalid_argument("potential and dual cells differ in size");
  const double shift = *std::min_element(nodal_phi.begin(), nodal_phi.end());
  GibbsBoltzmann gb;
  const std::size_t n = nodal_phi.size();
  gb.p.resize(n);
  gb.log_p.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(nodal_phi[i]))
      throw NumericsError("non-finite potential at node " + std::to_string(i));
    gb.p[i] = std::exp(-(nodal_phi[i] - shift)) * volumes[i];
    sum += gb.p[i];
  }
  const double log_sum = std::log(sum);
  for (std::size_t i = 0; i < n; ++i) {
    gb.p[i] /= sum;
    gb.log_p[i] = -(nodal_phi[i] - shift) + std::log(volumes[i]) - log_sum;
  }
  gb.log_z = log_sum - shift;
  return gb;
}

GibbsBoltzmann discrete_gibbs_boltzmann(const Mesh &mesh, const DualCells &duals,
                                        const PotentialField &field) {
  return discrete_gibbs_boltzmann(duals.volumes, field.nodal_values(mesh));
}

PartitionFunction continuous_partition_function(const Mesh &mesh,
                                                const PotentialField &field,
                                                int degree) {
  const auto rule = triangle_rule(degree);
  const std::vector<double> nodal =
      field.is_nodal_table() ? field.nodal_values(mesh) : std::vector<double>{};
  std::vector<double> phi;
  phi.reserve(rule.size() * static_cast<std::size_t>(mesh.num_triangles()));
  for (const Triangle &t : mesh.triangles()) {
    const Vec2 a = mesh.node(t[0]), b = mesh.node(t[1]), c = mesh.node(t[2]);
    for (const TrianglePoint &q : rule) {
      if (field.is_nodal_table())
        phi.push_back(q.l0 * nodal[static_cast<std::size_t>(t[0])] +
                      q.l1 * nodal[static_cast<std::size_t>(t[1])] +
                      q.l2 * nodal[static_cast<std::size_t>(t[2])]);
      else
        phi.push_back(field.value(q.l0 * a + q.l1 * b + q.l2 * c));
    }
  }
  const double shift = *std::min_element(phi.begin(), phi.end());
  double sum = 0.0;
  std::size_t k = 0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double s = 0.0;
    for (const TrianglePoint &q : rule)
      s += q.w * std::exp(-(phi[k++] - shift));
    sum += s * mesh.triangle_area(t);
  }
  if (!std::isfinite(sum) || !(sum > 0.0))
    throw NumericsError("partition function is not finite");
  PartitionFunction z;
  z.log_z = std::log(sum) - shift;
  z.z = std::exp(z.log_z);
  return z;
}

} // namespace crddme
