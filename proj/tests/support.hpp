#ifndef CRDDME_TEST_SUPPORT_HPP
#define CRDDME_TEST_SUPPORT_HPP

#include <memory>
#include <string>
#include <vector>

#include "crddme/eafe.hpp"
#include "crddme/reactions.hpp"
#include "crddme/ssa.hpp"

namespace crddme::test {

struct SpeciesSpec {
  std::string name;
  double d = 1.0;
  PotentialField phi;
};

struct BuiltModel {
  Mesh mesh;
  DualCells duals;
  std::shared_ptr<ReactionModel> model;
  std::shared_ptr<AssociationTable> assoc;
  std::shared_ptr<DissociationTable> dissoc;
};

inline RateOperator hop_operator(const Mesh &m, const DualCells &d, const SpeciesSpec &s) {
  return transition_rate_matrix(assemble_eafe_stiffness(m, s.phi, s.d), d, s.name);
}

/// Species A, B (and C when `reversible`) with a Doi reaction A + B -> C or
/// A + B -> nothing.
inline BuiltModel build_model(const Mesh &mesh, const std::vector<SpeciesSpec> &species,
                              DoiKernel kernel, bool reversible, double k_d = 2.0,
                              int samples_per_pair = 400) {
  BuiltModel b;
  b.mesh = mesh;
  b.duals = dual_cells(mesh);
  b.model = std::make_shared<ReactionModel>();
  for (const SpeciesSpec &s : species) {
    b.model->species.push_back(s.name);
    b.model->hops.push_back(hop_operator(mesh, b.duals, s));
  }
  TabulationOptions o;
  o.samples_per_pair = samples_per_pair;
  o.seed = 11;
  b.assoc = std::make_shared<AssociationTable>(tabulate_association(mesh, b.duals, kernel, o));
  BimolecularReaction r;
  r.a = 0;
  r.b = 1;
  r.association = b.assoc;
  if (reversible) {
    r.c = 2;
    b.dissoc = std::make_shared<DissociationTable>(tabulate_dissociation(
        *b.assoc, b.duals.volumes, species[0].phi.nodal_values(mesh),
        species[1].phi.nodal_values(mesh), species[2].phi.nodal_values(mesh),
        DetailedBalanceMode{k_d}));
    r.dissociation = b.dissoc;
  }
  b.model->bimolecular = r;
  b.model->validate();
  return b;
}

inline SystemState empty_state(const ReactionModel &m) {
  SystemState s;
  s.counts.assign(static_cast<std::size_t>(m.n_species()),
                  std::vector<int>(static_cast<std::size_t>(m.n_voxels()), 0));
  return s;
}

} // namespace crddme::test

#endif
