#include "crddme/fpe_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <queue>
#include <stdexcept>

#include <Eigen/SparseLU>

#include "crddme/errors.hpp"
#include "crddme/quadrature.hpp"

namespace crddme {

namespace {

using Triplet = Eigen::Triplet<double>;
using Vector = Eigen::VectorXd;
using LU = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;

Vector to_eigen(const std::vector<double> &v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> from_eigen(const Vector &v) { return {v.data(), v.data() + v.size()}; }

void factorize(LU &lu, const SparseMatrix &a, const char *what) {
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success)
    throw NumericsError(std::string(what) + ": sparse LU failed (" + lu.lastErrorMessage() + ")");
}

double max_abs_diagonal(const SparseMatrix &q) {
  double m = 0.0;
  for (int j = 0; j < q.outerSize(); ++j)
    m = std::max(m, std::abs(q.coeff(j, j)));
  return m;
}

} // namespace

// ---------------------------------------------------------------------------
// Steady problem

SteadySolution solve_steady_state(const Mesh &mesh, const SteadySolveSpec &spec) {
  if (!spec.forcing)
    throw ConfigError("steady solve needs a forcing function");
  const int n = mesh.num_nodes();
  const DualCells duals = dual_cells(mesh);
  const StiffnessMatrix s = assemble_eafe_stiffness(mesh, spec.potential, spec.d);

  SparseMatrix a = -s.matrix;
  for (int i = 0; i < n; ++i)
    a.coeffRef(i, i) += duals.volumes[static_cast<std::size_t>(i)];
  a.makeCompressed();

  Vector f = Vector::Zero(n);
  const auto rule = triangle_rule(spec.forcing_degree);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Triangle &tri = mesh.triangles()[static_cast<std::size_t>(t)];
    const Vec2 p0 = mesh.node(tri[0]), p1 = mesh.node(tri[1]), p2 = mesh.node(tri[2]);
    const double area = mesh.triangle_area(t);
    for (const TrianglePoint &q : rule) {
      const double fx = spec.forcing(q.l0 * p0 + q.l1 * p1 + q.l2 * p2);
      if (!std::isfinite(fx))
        throw NumericsError("forcing is not finite inside triangle " + std::to_string(t));
      f[tri[0]] += q.w * area * q.l0 * fx;
      f[tri[1]] += q.w * area * q.l1 * fx;
      f[tri[2]] += q.w * area * q.l2 * fx;
    }
  }

  LU lu;
  factorize(lu, a, "steady solve");
  const Vector rho = lu.solve(f);
  SteadySolution sol;
  sol.rho = from_eigen(rho);
  // Normwise backward error ||A rho - F|| / (||A|| ||rho|| + ||F||), infinity norms.
  double anorm = 0.0;
  {
    Vector rowsum = Vector::Zero(n);
    for (int col = 0; col < a.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(a, col); it; ++it)
        rowsum[it.row()] += std::abs(it.value());
    anorm = rowsum.maxCoeff();
  }
  const double scale = std::max(anorm * rho.cwiseAbs().maxCoeff() + f.cwiseAbs().maxCoeff(),
                                std::numeric_limits<double>::min());
  sol.relative_residual = (a * rho - f).cwiseAbs().maxCoeff() / scale;
  if (!(sol.relative_residual <= 1e-10)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", sol.relative_residual);
    throw NumericsError(std::string("steady solve residual ") + buf);
  }
  return sol;
}

double p1_l2_norm(const Mesh &mesh, const std::vector<double> &v) {
  if (static_cast<int>(v.size()) != mesh.num_nodes())
    throw std::invalid_argument("nodal vector does not match the mesh");
  double sum = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Triangle &tri = mesh.triangles()[static_cast<std::size_t>(t)];
    const double a = v[static_cast<std::size_t>(tri[0])];
    const double b = v[static_cast<std::size_t>(tri[1])];
    const double c = v[static_cast<std::size_t>(tri[2])];
    sum += mesh.triangle_area(t) / 6.0 * (a * a + b * b + c * c + a * b + b * c + a * c);
  }
  return std::sqrt(sum);
}

double p1_l2_error(const Mesh &mesh, const std::vector<double> &v,
                   const std::function<double(Vec2)> &exact, int degree) {
  if (static_cast<int>(v.size()) != mesh.num_nodes())
    throw std::invalid_argument("nodal vector does not match the mesh");
  const auto rule = triangle_rule(degree);
  double sum = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Triangle &tri = mesh.triangles()[static_cast<std::size_t>(t)];
    const Vec2 p0 = mesh.node(tri[0]), p1 = mesh.node(tri[1]), p2 = mesh.node(tri[2]);
    double s = 0.0;
    for (const TrianglePoint &q : rule) {
      const double uh = q.l0 * v[static_cast<std::size_t>(tri[0])] +
                        q.l1 * v[static_cast<std::size_t>(tri[1])] +
                        q.l2 * v[static_cast<std::size_t>(tri[2])];
      const double e = uh - exact(q.l0 * p0 + q.l1 * p1 + q.l2 * p2);
      s += q.w * e * e;
    }
    sum += s * mesh.triangle_area(t);
  }
  return std::sqrt(sum);
}

std::vector<ConvergenceLevel> error_report(const std::vector<Mesh> &meshes,
                                           const std::vector<std::vector<double>> &solutions,
                                           const std::function<double(Vec2)> &exact) {
  if (meshes.size() < 2 || meshes.size() != solutions.size())
    throw std::invalid_argument("error_report needs at least two levels with one solution each");
  std::vector<ConvergenceLevel> out(meshes.size());
  for (std::size_t l = 0; l < meshes.size(); ++l) {
    out[l].nodes = meshes[l].num_nodes();
    if (static_cast<int>(solutions[l].size()) != out[l].nodes)
      throw std::invalid_argument("solution size does not match its mesh");
    if (exact)
      out[l].exact_error = p1_l2_error(meshes[l], solutions[l], exact);
  }
  for (std::size_t l = 0; l + 1 < meshes.size(); ++l) {
    const Mesh &coarse = meshes[l];
    const Mesh &fine = meshes[l + 1];
    if (fine.num_nodes() <= coarse.num_nodes())
      throw std::invalid_argument("level " + std::to_string(l + 1) + " is not a refinement");
    double scale = 0.0;
    for (const Vec2 &p : coarse.nodes())
      scale = std::max(scale, std::max(std::abs(p.x), std::abs(p.y)));
    std::vector<double> diff(static_cast<std::size_t>(coarse.num_nodes()));
    for (int i = 0; i < coarse.num_nodes(); ++i) {
      if (distance(coarse.node(i), fine.node(i)) > 1e-9 * std::max(scale, 1.0))
        throw std::invalid_argument("node " + std::to_string(i) + " of level " +
                                    std::to_string(l) + " is not retained by level " +
                                    std::to_string(l + 1));
      diff[static_cast<std::size_t>(i)] = solutions[l][static_cast<std::size_t>(i)] -
                                          solutions[l + 1][static_cast<std::size_t>(i)];
    }
    out[l].difference = p1_l2_norm(coarse, diff);
  }
  for (std::size_t l = 0; l + 2 < meshes.size(); ++l) {
    const double a = *out[l].difference, b = *out[l + 1].difference;
    if (a > 0.0 && b > 0.0)
      out[l].rate = std::log2(a / b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-particle generator

TwoParticleGenerator build_two_particle_generator(const RateOperator &la, const RateOperator &lb,
                                                  const RateOperator *lc,
                                                  const AssociationTable &assoc,
                                                  const DissociationTable *dissoc,
                                                  TwoParticleMode mode) {
  const int n = la.size();
  if (lb.size() != n || assoc.n_voxels != n)
    throw std::invalid_argument("two-particle generator: operator sizes differ");
  const bool reversible = mode == TwoParticleMode::reversible;
  if (reversible) {
    if (!lc || lc->size() != n)
      throw std::invalid_argument("reversible generator needs a complex operator of size N");
    if (dissoc && dissoc->n_voxels != n)
      throw std::invalid_argument("dissociation table size differs");
  }
  const long nn = static_cast<long>(n) * n;
  const long size = reversible ? nn + n : nn;
  if (size > std::numeric_limits<int>::max())
    throw std::invalid_argument("two-particle state space too large");

  TwoParticleGenerator gen;
  gen.n_voxels = n;
  gen.mode = mode;
  std::vector<Triplet> trip;
  std::vector<double> exit(static_cast<std::size_t>(size), 0.0);
  auto add = [&](long to, long from, double rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate))
      throw NumericsError("negative or non-finite rate in two-particle generator");
    if (rate == 0.0)
      return;
    trip.emplace_back(static_cast<int>(to), static_cast<int>(from), rate);
    exit[static_cast<std::size_t>(from)] += rate;
  };

  for (int i = 0; i < n; ++i)
    for (SparseMatrix::InnerIterator it(la.matrix, i); it; ++it)
      if (it.row() != i)
        for (int j = 0; j < n; ++j)
          add(static_cast<long>(it.row()) * n + j, static_cast<long>(i) * n + j, it.value());
  for (int j = 0; j < n; ++j)
    for (SparseMatrix::InnerIterator it(lb.matrix, j); it; ++it)
      if (it.row() != j)
        for (int i = 0; i < n; ++i)
          add(static_cast<long>(i) * n + it.row(), static_cast<long>(i) * n + j, it.value());

  for (const AssociationPair &p : assoc.pairs) {
    const long from = static_cast<long>(p.i) * n + p.j;
    if (reversible) {
      for (int q = p.begin; q < p.end; ++q) {
        const PlacedRate &pr = assoc.placements[static_cast<std::size_t>(q)];
        add(nn + pr.k, from, pr.rate);
      }
    } else {
      if (!(p.rate >= 0.0))
        throw NumericsError("negative association rate");
      exit[static_cast<std::size_t>(from)] += p.rate;
    }
  }

  if (reversible) {
    for (int k = 0; k < n; ++k)
      for (SparseMatrix::InnerIterator it(lc->matrix, k); it; ++it)
        if (it.row() != k)
          add(nn + it.row(), nn + k, it.value());
    if (dissoc)
      for (int k = 0; k < n; ++k)
        for (int e = dissoc->begin[static_cast<std::size_t>(k)];
             e < dissoc->begin[static_cast<std::size_t>(k) + 1]; ++e) {
          const DissociationEntry &d = dissoc->entries[static_cast<std::size_t>(e)];
          add(static_cast<long>(d.i) * n + d.j, nn + k, d.rate);
        }
  }
  for (long s = 0; s < size; ++s)
    trip.emplace_back(static_cast<int>(s), static_cast<int>(s), -exit[static_cast<std::size_t>(s)]);
  gen.q.resize(size, size);
  gen.q.setFromTriplets(trip.begin(), trip.end());
  gen.q.makeCompressed();
  return gen;
}

// ---------------------------------------------------------------------------
// Oracle solves

std::vector<double> stationary_distribution(const SparseMatrix &q, const OracleOptions &opts) {
  const Eigen::Index n = q.rows();
  if (static_cast<std::size_t>(n) > opts.state_cap)
    throw NumericsError("state space of " + std::to_string(n) + " exceeds the cap of " +
                        std::to_string(opts.state_cap));
  // Bordered system: row 0 replaced by the normalization sum p = 1.
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(q.nonZeros() + n));
  for (int j = 0; j < q.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(q, j); it; ++it)
      if (it.row() != 0)
        trip.emplace_back(static_cast<int>(it.row()), j, it.value());
    trip.emplace_back(0, j, 1.0);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  LU lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success)
    throw NumericsError("stationary solve failed: chain is reducible or singular");
  Vector rhs = Vector::Zero(n);
  rhs[0] = 1.0;
  Vector p = lu.solve(rhs);
  const double scale = std::max(max_abs_diagonal(q), std::numeric_limits<double>::min());
  const double residual = (q * p).cwiseAbs().maxCoeff() / scale;
  if (!std::isfinite(residual) || p.minCoeff() < -1e-10)
    throw NumericsError("stationary solve failed: chain is reducible");
  if (residual > 1e-10)
    throw NumericsError("stationary residual " + std::to_string(residual) + " exceeds 1e-10");
  return from_eigen(p);
}

std::vector<std::vector<double>> transient_solve(const SparseMatrix &q, std::vector<double> p0,
                                                 const std::vector<double> &t_grid,
                                                 const OracleOptions &opts) {
  const Eigen::Index n = q.rows();
  if (static_cast<std::size_t>(n) > opts.state_cap)
    throw NumericsError("state space of " + std::to_string(n) + " exceeds the cap");
  if (static_cast<Eigen::Index>(p0.size()) != n)
    throw std::invalid_argument("initial distribution does not match the generator");
  for (std::size_t k = 0; k < t_grid.size(); ++k)
    if (!(t_grid[k] >= 0.0) || (k > 0 && t_grid[k] < t_grid[k - 1]))
      throw std::invalid_argument("time grid must be sorted and non-negative");

  // TR-BDF2 with gamma = 2 - sqrt(2); both stages share I - d h Q, d = gamma/2.
  const double gamma = 2.0 - std::sqrt(2.0);
  const double d = gamma / 2.0;
  const double w = std::sqrt(2.0) / 4.0;
  const double c1 = 1.0 / (gamma * (2.0 - gamma));
  const double c0 = (1.0 - gamma) * (1.0 - gamma) / (gamma * (2.0 - gamma));
  SparseMatrix eye(n, n);
  eye.setIdentity();

  std::map<int, std::unique_ptr<LU>> cache;
  auto system_for = [&](double h) {
    auto lu = std::make_unique<LU>();
    SparseMatrix a = eye - (d * h) * q;
    a.makeCompressed();
    factorize(*lu, a, "transient solve");
    return lu;
  };

  Vector y = to_eigen(p0);
  std::vector<std::vector<double>> out;
  out.reserve(t_grid.size());
  double t = 0.0;
  const double rate = max_abs_diagonal(q);
  int e = rate > 0.0 ? static_cast<int>(std::floor(std::log2(0.01 / rate))) : 0;
  std::size_t g = 0;
  while (g < t_grid.size() && t_grid[g] <= 0.0) {
    out.push_back(from_eigen(y));
    ++g;
  }
  std::unique_ptr<LU> adhoc;
  double adhoc_h = -1.0;
  int steps = 0;
  while (g < t_grid.size()) {
    if (++steps > 50'000'000)
      throw NumericsError("transient solve did not reach the final time");
    const double target = t_grid[g];
    double h = std::ldexp(1.0, e);
    const bool hit = t + h >= target;
    LU *lu = nullptr;
    if (hit) {
      h = target - t;
      if (h != adhoc_h) {
        adhoc = system_for(h);
        adhoc_h = h;
      }
      lu = adhoc.get();
    } else {
      auto &slot = cache[e];
      if (!slot)
        slot = system_for(h);
      lu = slot.get();
    }
    const Vector fn = q * y;
    const Vector yg = lu->solve(y + (d * h) * fn);
    const Vector fg = q * yg;
    const Vector y1 = lu->solve(c1 * yg - c0 * y);
    const Vector f1 = q * y1;
    const Vector est_raw =
        h * ((1.0 - w) / 3.0 * fn + (3.0 * w + 1.0) / 3.0 * fg + d / 3.0 * f1) - (y1 - y);
    const double err = lu->solve(est_raw).cwiseAbs().maxCoeff();
    if (!std::isfinite(err))
      throw NumericsError("transient solve produced non-finite values");
    if (err > opts.tolerance) {
      // Shrink: the local error scales like h^3.
      const int drop = std::max(1, static_cast<int>(std::ceil(std::log2(err / opts.tolerance) / 3.0)));
      e = std::min(e, static_cast<int>(std::floor(std::log2(h)))) - drop;
      if (e < -200)
        throw NumericsError("transient step size underflow");
      continue;
    }
    y = y1;
    t = hit ? target : t + h;
    if (hit) {
      while (g < t_grid.size() && t_grid[g] <= t) {
        out.push_back(from_eigen(y));
        ++g;
      }
    } else if (err < opts.tolerance / 16.0) {
      ++e;
    }
  }
  return out;
}

double mean_binding_time(const TwoParticleGenerator &gen, const std::vector<double> &p0,
                         const OracleOptions &opts) {
  if (gen.mode != TwoParticleMode::annihilation)
    throw std::invalid_argument("mean binding time needs the annihilation generator");
  const Eigen::Index n = gen.q.rows();
  if (static_cast<std::size_t>(n) > opts.state_cap)
    throw NumericsError("state space of " + std::to_string(n) + " exceeds the cap");
  if (static_cast<Eigen::Index>(p0.size()) != n)
    throw std::invalid_argument("initial distribution does not match the generator");
  SparseMatrix qt = gen.q.transpose();
  qt.makeCompressed();
  LU lu;
  factorize(lu, qt, "mean binding time");
  const Vector tau = lu.solve(Vector::Constant(n, -1.0));
  const double res = (qt * tau + Vector::Ones(n)).cwiseAbs().maxCoeff();
  if (!std::isfinite(res) || res > 1e-8 * std::max(1.0, tau.cwiseAbs().maxCoeff() * max_abs_diagonal(gen.q)))
    throw NumericsError("mean binding time solve inaccurate; absorption may be unreachable");
  return to_eigen(p0).dot(tau);
}

std::vector<double> uniform_pair_distribution(const std::vector<double> &volumes) {
  double total = 0.0;
  for (double v : volumes)
    total += v;
  const std::size_t n = volumes.size();
  std::vector<double> p(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      p[i * n + j] = volumes[i] * volumes[j] / (total * total);
  return p;
}

// ---------------------------------------------------------------------------
// Multiparticle master equation

SystemState MasterEquation::state(std::size_t s) const {
  SystemState st;
  st.counts.assign(static_cast<std::size_t>(n_species), {});
  const auto &flat = states[s];
  for (int sp = 0; sp < n_species; ++sp)
    st.counts[static_cast<std::size_t>(sp)].assign(
        flat.begin() + static_cast<long>(sp) * n_voxels,
        flat.begin() + static_cast<long>(sp + 1) * n_voxels);
  return st;
}

long MasterEquation::index_of(const SystemState &st) const {
  std::vector<int> flat;
  for (const auto &c : st.counts)
    flat.insert(flat.end(), c.begin(), c.end());
  for (std::size_t s = 0; s < states.size(); ++s)
    if (states[s] == flat)
      return static_cast<long>(s);
  return -1;
}

MasterEquation build_master_equation(const ReactionModel &model, const SystemState &initial,
                                     const OracleOptions &opts) {
  model.validate();
  MasterEquation me;
  me.n_species = model.n_species();
  me.n_voxels = model.n_voxels();
  const int nv = me.n_voxels;
  auto at = [nv](int s, int v) { return static_cast<std::size_t>(s) * static_cast<std::size_t>(nv) + static_cast<std::size_t>(v); };

  std::vector<int> start;
  for (const auto &c : initial.counts)
    start.insert(start.end(), c.begin(), c.end());
  if (start.size() != at(me.n_species, 0))
    throw std::invalid_argument("initial state does not match the model");

  std::map<std::vector<int>, int> index;
  std::queue<int> frontier;
  auto intern = [&](std::vector<int> st) {
    auto [it, fresh] = index.emplace(st, static_cast<int>(me.states.size()));
    if (fresh) {
      if (me.states.size() >= opts.state_cap)
        throw NumericsError("master equation exceeds the state cap of " +
                            std::to_string(opts.state_cap));
      me.states.push_back(std::move(st));
      frontier.push(it->second);
    }
    return it->second;
  };
  intern(start);

  std::vector<Triplet> trip;
  std::vector<double> exit;
  while (!frontier.empty()) {
    const int src = frontier.front();
    frontier.pop();
    const std::vector<int> cur = me.states[static_cast<std::size_t>(src)];
    double out_rate = 0.0;
    auto go = [&](std::vector<int> next, double rate) {
      if (rate <= 0.0)
        return;
      const int dst = intern(std::move(next));
      trip.emplace_back(dst, src, rate);
      out_rate += rate;
    };
    for (int s = 0; s < me.n_species; ++s) {
      const SparseMatrix &l = model.hops[static_cast<std::size_t>(s)].matrix;
      for (int j = 0; j < nv; ++j) {
        const int c = cur[at(s, j)];
        if (c == 0)
          continue;
        for (SparseMatrix::InnerIterator it(l, j); it; ++it) {
          if (it.row() == j || it.value() <= 0.0)
            continue;
          std::vector<int> next = cur;
          --next[at(s, j)];
          ++next[at(s, static_cast<int>(it.row()))];
          go(std::move(next), c * it.value());
        }
      }
    }
    if (model.bimolecular) {
      const auto &bi = *model.bimolecular;
      const AssociationTable &as = *bi.association;
      for (const AssociationPair &p : as.pairs) {
        const int na = cur[at(bi.a, p.i)], nb = cur[at(bi.b, p.j)];
        if (na == 0 || nb == 0)
          continue;
        if (bi.c < 0) {
          std::vector<int> next = cur;
          --next[at(bi.a, p.i)];
          --next[at(bi.b, p.j)];
          go(std::move(next), static_cast<double>(na) * nb * p.rate);
          continue;
        }
        for (int q = p.begin; q < p.end; ++q) {
          const PlacedRate &pr = as.placements[static_cast<std::size_t>(q)];
          std::vector<int> next = cur;
          --next[at(bi.a, p.i)];
          --next[at(bi.b, p.j)];
          ++next[at(bi.c, pr.k)];
          go(std::move(next), static_cast<double>(na) * nb * pr.rate);
        }
      }
      if (bi.dissociation) {
        const DissociationTable &dt = *bi.dissociation;
        for (int k = 0; k < nv; ++k) {
          const int nc = cur[at(bi.c, k)];
          if (nc == 0)
            continue;
          for (int e = dt.begin[static_cast<std::size_t>(k)];
               e < dt.begin[static_cast<std::size_t>(k) + 1]; ++e) {
            const DissociationEntry &de = dt.entries[static_cast<std::size_t>(e)];
            std::vector<int> next = cur;
            --next[at(bi.c, k)];
            ++next[at(bi.a, de.i)];
            ++next[at(bi.b, de.j)];
            go(std::move(next), nc * de.rate);
          }
        }
      }
    }
    for (const LinearReaction &lr : model.linear)
      for (int v = 0; v < nv; ++v) {
        const int c = cur[at(lr.from, v)];
        if (c == 0)
          continue;
        std::vector<int> next = cur;
        --next[at(lr.from, v)];
        ++next[at(lr.to, v)];
        go(std::move(next), c * lr.rate);
      }
    if (exit.size() <= static_cast<std::size_t>(src))
      exit.resize(static_cast<std::size_t>(src) + 1, 0.0);
    exit[static_cast<std::size_t>(src)] = out_rate;
  }
  const auto n = static_cast<Eigen::Index>(me.states.size());
  exit.resize(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index s = 0; s < n; ++s)
    trip.emplace_back(static_cast<int>(s), static_cast<int>(s), -exit[static_cast<std::size_t>(s)]);
  me.q.resize(n, n);
  me.q.setFromTriplets(trip.begin(), trip.end());
  me.q.makeCompressed();
  return me;
}

} // namespace crddme
