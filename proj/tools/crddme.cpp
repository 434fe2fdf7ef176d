// Command-line front end: runs built-in or file-based scenarios and writes
// CSV outputs plus a manifest.json into an output directory.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "crddme/bd.hpp"
#include "crddme/eafe.hpp"
#include "crddme/errors.hpp"
#include "crddme/fpe_oracle.hpp"
#include "crddme/mesh.hpp"
#include "crddme/parallel.hpp"
#include "crddme/reactions.hpp"
#include "crddme/scenario.hpp"
#include "crddme/ssa.hpp"
#include "crddme/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crddme;

namespace {

constexpr const char *kVersion = "1.0.0";

enum ExitCode { ok = 0, other = 1, config = 2, mesh = 3, numerics = 4 };

struct Options {
  std::string scenario;
  std::string config_path;
  std::string out_dir;
  std::string cache_dir;
  std::string mesh_path;
  std::optional<int> level;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<double> t_end;
  std::optional<double> dt;
  std::vector<double> snapshots;
  int min_level = -1;
  int max_level = -1;
  bool write_mesh = false;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ScenarioConfig resolve(const Options &o) {
  if (o.scenario.empty() == o.config_path.empty())
    throw ConfigError("give exactly one of --scenario and --config");
  ScenarioConfig c = o.config_path.empty() ? builtin_scenario(o.scenario) : load_scenario(o.config_path);
  if (!o.mesh_path.empty()) {
    c.domain.shape = "mesh";
    c.domain.mesh_path = o.mesh_path;
  }
  if (o.level)
    c.domain.level = *o.level;
  if (o.n)
    c.run.n_realizations = *o.n;
  if (o.seed)
    c.run.master_seed = *o.seed;
  if (o.t_end)
    c.run.t_end = *o.t_end;
  if (o.dt)
    c.bd.dt = *o.dt;
  if (!o.snapshots.empty())
    c.run.snapshot_times = o.snapshots;
  if (c.steady && o.min_level >= 0)
    c.steady->min_level = o.min_level;
  if (c.steady && o.max_level >= 0)
    c.steady->max_level = o.max_level;
  c.validate();
  return c;
}

class Output {
public:
  Output(const Options &o, const ScenarioConfig &c, std::string command)
      : dir_(o.out_dir.empty() ? "out/" + (c.name.empty() ? std::string("scenario") : c.name)
                               : o.out_dir) {
    fs::create_directories(dir_);
    manifest_["command"] = std::move(command);
    manifest_["scenario"] = c.name;
    manifest_["config"] = to_json(c);
    manifest_["config_hash"] = hex64(config_hash(c));
    manifest_["master_seed"] = c.run.master_seed;
    manifest_["seed_derivation"] =
        "realization r: split(master, r) = splitmix64(splitmix64(master) ^ splitmix64(r + 1))";
    manifest_["version"] = kVersion;
    manifest_["outputs"] = json::array();
  }

  std::ofstream open(const std::string &name) {
    manifest_["outputs"].push_back(name);
    std::ofstream f(dir_ / name);
    if (!f)
      throw std::runtime_error("cannot write " + (dir_ / name).string());
    f << std::setprecision(17);
    return f;
  }

  json &manifest() { return manifest_; }
  const fs::path &dir() const { return dir_; }

  void finish() {
    std::ofstream f(dir_ / "manifest.json");
    f << manifest_.dump(2) << "\n";
    std::cout << "wrote " << (dir_ / "manifest.json").string() << "\n";
  }

private:
  fs::path dir_;
  json manifest_;
};

std::string fmt(double v) {
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<double> default_grid(const ScenarioConfig &c) {
  if (!c.run.t_grid.empty())
    return c.run.t_grid;
  std::vector<double> g(101);
  for (std::size_t k = 0; k < g.size(); ++k)
    g[k] = c.run.t_end * static_cast<double>(k) / 100.0;
  return g;
}

json mesh_summary(const Mesh &m) {
  const DualCells d = dual_cells(m);
  double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0;
  for (double v : d.volumes) {
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  return {{"nodes", m.num_nodes()},
          {"triangles", m.num_triangles()},
          {"edges", m.num_edges()},
          {"boundary_edges", m.boundary_edges().size()},
          {"area", m.total_area()},
          {"h_max", m.max_edge_length()},
          {"min_voxel_area", vmin},
          {"max_voxel_area", vmax},
          {"non_delaunay_edges", non_delaunay_edges(m).size()},
          {"hash", hex64(m.hash())}};
}

// ---------------------------------------------------------------------------
// Curves shared by simulate and bd

void write_ensemble_outputs(Output &out, const ScenarioConfig &c,
                            const std::vector<double> &binding_times,
                            const std::vector<std::vector<std::vector<int>>> &totals,
                            const std::vector<double> &t_grid) {
  if (!binding_times.empty()) {
    std::ofstream f = out.open("binding_times.csv");
    f << "realization,binding_time\n";
    std::vector<double> finite;
    for (std::size_t r = 0; r < binding_times.size(); ++r) {
      f << r << "," << fmt(binding_times[r]) << "\n";
      if (std::isfinite(binding_times[r]))
        finite.push_back(binding_times[r]);
    }
    json s{{"n", binding_times.size()}, {"unbound_at_t_end", binding_times.size() - finite.size()}};
    if (finite.size() >= 2) {
      const MeanCI ci = mean_ci(finite);
      s["mean"] = ci.mean;
      s["halfwidth95"] = ci.halfwidth;
      s["std_error"] = ci.std_error;
    }
    out.manifest()["binding_time"] = s;
  }
  if (totals.empty())
    return;
  {
    std::ofstream f = out.open("totals.csv");
    f << "realization,t";
    for (const SpeciesConfig &s : c.species)
      f << "," << s.name;
    f << "\n";
    for (std::size_t r = 0; r < totals.size(); ++r)
      for (std::size_t k = 0; k < t_grid.size(); ++k) {
        f << r << "," << t_grid[k];
        for (int v : totals[r][k])
          f << "," << v;
        f << "\n";
      }
  }
  if (totals.size() >= 2) {
    std::ofstream f = out.open("mean_counts.csv");
    f << "t";
    for (const SpeciesConfig &s : c.species)
      f << "," << s.name << "," << s.name << "_hw95";
    f << "\n";
    std::vector<std::vector<CurvePoint>> curves;
    for (std::size_t s = 0; s < c.species.size(); ++s) {
      std::vector<std::vector<double>> v(totals.size(), std::vector<double>(t_grid.size()));
      for (std::size_t r = 0; r < totals.size(); ++r)
        for (std::size_t k = 0; k < t_grid.size(); ++k)
          v[r][k] = totals[r][k][s];
      curves.push_back(mean_curve(v, t_grid));
    }
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
      f << t_grid[k];
      for (const auto &cv : curves)
        f << "," << cv[k].value << "," << cv[k].halfwidth;
      f << "\n";
    }
  }
  if (c.bimolecular && !c.bimolecular->c.empty()) {
    const auto ic = static_cast<std::size_t>(c.species_index(c.bimolecular->c, ""));
    std::vector<std::vector<bool>> ind(totals.size(), std::vector<bool>(t_grid.size()));
    for (std::size_t r = 0; r < totals.size(); ++r)
      for (std::size_t k = 0; k < t_grid.size(); ++k)
        ind[r][k] = totals[r][k][ic] > 0;
    std::ofstream f = out.open("pbound.csv");
    f << "t,p_bound,hw95\n";
    for (const CurvePoint &p : pbound_curve(ind, t_grid))
      f << p.t << "," << p.value << "," << p.halfwidth << "\n";
  }
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_mesh_info(const Options &o) {
  const ScenarioConfig c = resolve(o);
  Output out(o, c, "mesh-info");
  const Mesh m = build_mesh(c.domain);
  const json s = mesh_summary(m);
  out.manifest()["mesh"] = s;
  std::cout << s.dump(2) << "\n";
  if (o.write_mesh) {
    std::ofstream f = out.open("mesh.txt");
    write_mesh(f, m);
  }
  out.finish();
  return ok;
}

int cmd_assemble(const Options &o) {
  const ScenarioConfig c = resolve(o);
  Output out(o, c, "assemble");
  const Mesh m = build_mesh(c.domain);
  const DualCells duals = dual_cells(m);
  out.manifest()["mesh"] = mesh_summary(m);
  json reports = json::array();
  for (const SpeciesConfig &s : c.species) {
    const PotentialField phi = s.potential.build();
    const StiffnessMatrix st = assemble_eafe_stiffness(m, phi, Diffusivity(s.diffusivity));
    const MMatrixReport mm = check_m_matrix(st);
    const RateOperator l = transition_rate_matrix(st, duals, s.name);
    const GibbsBoltzmann gb = discrete_gibbs_boltzmann(m, duals, phi);
    const EquilibriumResiduals res = verify_equilibrium(l, gb.p);
    std::ofstream f = out.open("operator_" + s.name + ".coo");
    f << "row,col,value\n";
    for (int col = 0; col < l.matrix.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(l.matrix, col); it; ++it)
        f << it.row() << "," << it.col() << "," << it.value() << "\n";
    reports.push_back({{"species", s.name},
                       {"potential", phi.describe()},
                       {"m_matrix", mm.is_m_matrix},
                       {"min_offdiag", mm.min_offdiag},
                       {"hops", l.num_hops()},
                       {"max_exit_rate", res.max_exit_rate},
                       {"stationarity_residual", res.stationarity},
                       {"detailed_balance_residual", res.detailed_balance}});
  }
  out.manifest()["operators"] = reports;
  std::cout << reports.dump(2) << "\n";
  out.finish();
  return ok;
}

int cmd_steady_solve(const Options &o) {
  const ScenarioConfig c = resolve(o);
  Output out(o, c, "steady-solve");
  const Mesh m = build_mesh(c.domain);
  const SteadySolveSpec spec = build_steady_spec(c);
  const SteadySolution sol = solve_steady_state(m, spec);
  std::ofstream f = out.open("steady.csv");
  f << "node,x,y,rho,exact\n";
  for (int i = 0; i < m.num_nodes(); ++i)
    f << i << "," << m.node(i).x << "," << m.node(i).y << "," << sol.rho[static_cast<std::size_t>(i)]
      << "," << spec.exact(m.node(i)) << "\n";
  out.manifest()["mesh"] = mesh_summary(m);
  out.manifest()["relative_residual"] = sol.relative_residual;
  out.manifest()["l2_error"] = p1_l2_error(m, sol.rho, spec.exact);
  out.finish();
  return ok;
}

int cmd_tabulate(const Options &o) {
  const ScenarioConfig c = resolve(o);
  if (!c.bimolecular)
    throw ConfigError("scenario has no bimolecular reaction", "reactions.bimolecular");
  Output out(o, c, "tabulate");
  const Mesh m = build_mesh(c.domain);
  const BuiltModel b = build_model(c, m, o.cache_dir);
  const ReactionTables &t = *b.tables;
  std::ofstream f = out.open("tables.txt");
  write_tables(f, t, m.hash());
  out.manifest()["mesh"] = mesh_summary(m);
  out.manifest()["tables"] = {{"pairs", t.association.pairs.size()},
                              {"placements", t.association.placements.size()},
                              {"dissociation_entries", t.dissociation.entries.size()},
                              {"checksum", hex64(t.checksum())},
                              {"cache_hit", b.table_cache_hit},
                              {"warnings", b.warnings}};
  for (const std::string &w : b.warnings)
    std::cerr << "warning: " << w << "\n";
  out.finish();
  return ok;
}

int cmd_simulate(const Options &o) {
  const ScenarioConfig c = resolve(o);
  Output out(o, c, "simulate");
  const Mesh m = build_mesh(c.domain);
  const BuiltModel b = build_model(c, m, o.cache_dir.empty() ? out.dir().string() : o.cache_dir);
  for (const std::string &w : b.warnings)
    std::cerr << "warning: " << w << "\n";
  auto table = std::make_shared<const ChannelTable>(b.model);
  EnsembleOutputs eo;
  eo.binding_times = c.run.binding_times;
  if (!c.run.binding_times || !c.run.t_grid.empty())
    eo.t_grid = default_grid(c);
  eo.snapshot_times = c.run.snapshot_times;
  const EnsembleResult res = run_ensemble(table, b.duals.volumes, b.initial, c.run.n_realizations,
                                          c.run.master_seed, c.run.t_end, eo);
  out.manifest()["mesh"] = mesh_summary(m);
  out.manifest()["threads"] = worker_count();
  std::uint64_t events = 0;
  for (std::uint64_t e : res.n_events)
    events += e;
  out.manifest()["events"] = events;
  write_ensemble_outputs(out, c, res.binding_times, res.totals, eo.t_grid);
  for (std::size_t k = 0; k < eo.snapshot_times.size(); ++k) {
    std::ostringstream name;
    name << "snapshot_" << k << ".csv";
    std::ofstream f = out.open(name.str());
    f << "voxel,x,y,t";
    for (const SpeciesConfig &s : c.species)
      f << "," << s.name;
    f << "\n";
    const double n = static_cast<double>(res.snapshots.size());
    for (int v = 0; v < m.num_nodes(); ++v) {
      f << v << "," << m.node(v).x << "," << m.node(v).y << "," << eo.snapshot_times[k];
      for (std::size_t s = 0; s < c.species.size(); ++s) {
        double sum = 0.0;
        for (const auto &snap : res.snapshots)
          sum += snap[k].counts[s][static_cast<std::size_t>(v)];
        f << "," << sum / n;
      }
      f << "\n";
    }
  }
  out.finish();
  return ok;
}

int cmd_bd(const Options &o) {
  const ScenarioConfig c = resolve(o);
  Output out(o, c, "bd");
  const Mesh m = build_mesh(c.domain);
  BDSimulator sim(build_bd_config(c));
  EnsembleOutputs eo;
  eo.binding_times = c.run.binding_times;
  if (!c.run.binding_times || !c.run.t_grid.empty())
    eo.t_grid = default_grid(c);
  const BDEnsembleResult res = run_bd_ensemble(sim, build_bd_initial(c, m), c.run.n_realizations,
                                               c.run.master_seed, c.run.t_end, eo);
  std::uint64_t steps = 0;
  for (std::uint64_t s : res.steps)
    steps += s;
  out.manifest()["steps"] = steps;
  out.manifest()["dt"] = c.bd.dt;
  out.manifest()["threads"] = worker_count();
  write_ensemble_outputs(out, c, res.binding_times, res.totals, eo.t_grid);
  out.finish();
  return ok;
}

/// Exact one-A/one-B (or one-C) curves from the two-particle generator.
int cmd_oracle(const Options &o) {
  const ScenarioConfig c = resolve(o);
  if (!c.bimolecular)
    throw ConfigError("oracle needs a bimolecular reaction", "reactions.bimolecular");
  Output out(o, c, "oracle");
  const Mesh m = build_mesh(c.domain);
  const BuiltModel b = build_model(c, m, o.cache_dir.empty() ? out.dir().string() : o.cache_dir);
  const BimolecularReaction &br = *b.model->bimolecular;
  const auto hop = [&](int s) { return b.model->hops[static_cast<std::size_t>(s)]; };
  const bool reversible = br.dissociation != nullptr && br.c >= 0;
  const TwoParticleGenerator gen = build_two_particle_generator(
      hop(br.a), hop(br.b), br.c >= 0 ? &b.model->hops[static_cast<std::size_t>(br.c)] : nullptr,
      *br.association, br.dissociation.get(),
      reversible ? TwoParticleMode::reversible : TwoParticleMode::annihilation);
  const int n = gen.n_voxels;
  const double area = b.duals.total_volume();

  std::vector<double> p0(static_cast<std::size_t>(gen.size()), 0.0);
  const auto one_uniform = [&](const std::string &name) {
    const auto &init = c.species[static_cast<std::size_t>(c.species_index(name, ""))].initial;
    return init.size() == 1 && init[0].kind == "uniform" && init[0].count == 1 &&
           init[0].r_min < 0.0 && init[0].r_max < 0.0;
  };
  const auto none = [&](const std::string &name) {
    return name.empty() || c.species[static_cast<std::size_t>(c.species_index(name, ""))].initial.empty();
  };
  const auto &bc = *c.bimolecular;
  if (one_uniform(bc.a) && one_uniform(bc.b) && none(bc.c)) {
    const std::vector<double> pu = uniform_pair_distribution(b.duals.volumes);
    std::copy(pu.begin(), pu.end(), p0.begin());
  } else if (reversible && none(bc.a) && none(bc.b) && one_uniform(bc.c)) {
    for (int k = 0; k < n; ++k)
      p0[static_cast<std::size_t>(gen.bound_index(k))] = b.duals.volumes[static_cast<std::size_t>(k)] / area;
  } else {
    throw ConfigError("oracle needs one uniform A and B, or one uniform C", "species");
  }

  OracleOptions opts;
  const std::vector<double> grid = default_grid(c);
  const auto p = transient_solve(gen.q, p0, grid, opts);
  out.manifest()["mesh"] = mesh_summary(m);
  out.manifest()["states"] = gen.size();
  if (reversible) {
    const std::vector<double> st = stationary_distribution(gen.q, opts);
    double bound = 0.0;
    for (int k = 0; k < n; ++k)
      bound += st[static_cast<std::size_t>(gen.bound_index(k))];
    out.manifest()["stationary_p_bound"] = bound;
    std::ofstream f = out.open("oracle_pbound.csv");
    f << "t,p_bound\n";
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double s = 0.0;
      for (int v = 0; v < n; ++v)
        s += p[k][static_cast<std::size_t>(gen.bound_index(v))];
      f << grid[k] << "," << s << "\n";
    }
    std::cout << "stationary P_bound = " << std::setprecision(12) << bound << "\n";
  } else {
    const double mbt = mean_binding_time(gen, p0, opts);
    out.manifest()["mean_binding_time"] = mbt;
    std::ofstream f = out.open("oracle_survival.csv");
    f << "t,survival\n";
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double s = 0.0;
      for (double v : p[k])
        s += v;
      f << grid[k] << "," << s << "\n";
    }
    std::cout << "mean binding time = " << std::setprecision(12) << mbt << "\n";
  }
  out.finish();
  return ok;
}

int cmd_converge(const Options &o) {
  const ScenarioConfig c = resolve(o);
  Output out(o, c, "converge");
  if (c.steady) {
    const SteadySolveSpec spec = build_steady_spec(c);
    const Shape shape = domain_shape(c.domain);
    std::vector<Mesh> meshes;
    std::vector<std::vector<double>> sols;
    for (int l = c.steady->min_level; l <= c.steady->max_level; ++l) {
      meshes.push_back(generate_mesh(shape, l));
      sols.push_back(solve_steady_state(meshes.back(), spec).rho);
    }
    const auto rep = error_report(meshes, sols, spec.exact);
    std::ofstream f = out.open("converge.csv");
    f << "level,nodes,l2_difference,rate,l2_exact_error\n";
    for (std::size_t l = 0; l < rep.size(); ++l) {
      f << c.steady->min_level + static_cast<int>(l) << "," << rep[l].nodes << ","
        << (rep[l].difference ? fmt(*rep[l].difference) : "") << ","
        << (rep[l].rate ? fmt(*rep[l].rate) : "") << ","
        << (rep[l].exact_error ? fmt(*rep[l].exact_error) : "") << "\n";
      std::cout << "N=" << rep[l].nodes;
      if (rep[l].difference)
        std::cout << " e=" << *rep[l].difference;
      if (rep[l].rate)
        std::cout << " rate=" << *rep[l].rate;
      std::cout << "\n";
    }
    out.finish();
    return ok;
  }
  // Stochastic: mean binding time per refinement level.
  if (!c.run.binding_times)
    throw ConfigError("converge needs a steady study or run.binding_times", "run.binding_times");
  const int lo = o.min_level >= 0 ? o.min_level : 0;
  const int hi = o.max_level >= 0 ? o.max_level : 3;
  std::vector<double> means, hws, hs;
  std::ofstream f = out.open("converge.csv");
  f << "level,nodes,h,mean_binding_time,hw95,unbound\n";
  for (int l = lo; l <= hi; ++l) {
    ScenarioConfig cl = c;
    cl.domain.level = l;
    const Mesh m = build_mesh(cl.domain);
    const BuiltModel b = build_model(cl, m, o.cache_dir.empty() ? out.dir().string() : o.cache_dir);
    EnsembleOutputs eo;
    eo.binding_times = true;
    const EnsembleResult res =
        run_ensemble(std::make_shared<const ChannelTable>(b.model), b.duals.volumes, b.initial,
                     cl.run.n_realizations, cl.run.master_seed, cl.run.t_end, eo);
    std::vector<double> finite;
    for (double t : res.binding_times)
      if (std::isfinite(t))
        finite.push_back(t);
    if (finite.size() < 2)
      throw NumericsError("too few binding events at level " + std::to_string(l));
    const MeanCI ci = mean_ci(finite);
    means.push_back(ci.mean);
    hws.push_back(ci.halfwidth);
    hs.push_back(m.max_edge_length());
    f << l << "," << m.num_nodes() << "," << hs.back() << "," << ci.mean << "," << ci.halfwidth
      << "," << res.binding_times.size() - finite.size() << "\n";
    std::cout << "level " << l << ": N=" << m.num_nodes() << " mean=" << ci.mean << " +/- "
              << ci.halfwidth << "\n";
  }
  const ConvergenceReport rep = convergence_report(means, hs, hws);
  std::cout << rep.summary();
  out.manifest()["convergence"] = rep.summary();
  out.manifest()["noise_limited"] = rep.noise_limited;
  out.finish();
  return ok;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Reaction-drift-diffusion master equation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Options o;

  const auto common = [&](CLI::App *sub) {
    sub->add_option("--scenario", o.scenario, "Built-in scenario name");
    sub->add_option("--config", o.config_path, "Scenario JSON file");
    sub->add_option("--out", o.out_dir, "Output directory (default out/<scenario>)");
    sub->add_option("--cache", o.cache_dir, "Reaction table cache directory");
    sub->add_option("--mesh", o.mesh_path, "Mesh file overriding the scenario domain");
    sub->add_option("--level", o.level, "Mesh refinement level");
    sub->add_option("--n", o.n, "Number of realizations");
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--t-end", o.t_end, "Final time (s)");
    sub->add_option("--dt", o.dt, "Brownian dynamics time step (s)");
    sub->add_option("--snapshots", o.snapshots, "Snapshot times")->delimiter(',');
    sub->add_option("--min-level", o.min_level, "Coarsest level for converge");
    sub->add_option("--max-level", o.max_level, "Finest level for converge");
  };

  struct Sub {
    const char *name;
    const char *help;
    int (*fn)(const Options &);
  };
  const Sub subs[] = {
      {"mesh-info", "Mesh statistics", cmd_mesh_info},
      {"assemble", "EAFE hop operators and equilibrium residuals", cmd_assemble},
      {"steady-solve", "Steady drift-diffusion-reaction solve", cmd_steady_solve},
      {"tabulate", "Association and dissociation tables", cmd_tabulate},
      {"simulate", "SSA ensemble", cmd_simulate},
      {"bd", "Brownian dynamics ensemble", cmd_bd},
      {"oracle", "Exact two-particle curves", cmd_oracle},
      {"converge", "Refinement study", cmd_converge},
  };
  int (*chosen)(const Options &) = nullptr;
  for (const Sub &s : subs) {
    CLI::App *sub = app.add_subcommand(s.name, s.help);
    common(sub);
    if (std::string(s.name) == "mesh-info")
      sub->add_flag("--write-mesh", o.write_mesh, "Also write mesh.txt");
    sub->callback([&chosen, fn = s.fn] { chosen = fn; });
  }
  auto *names = app.add_subcommand("scenarios", "List built-in scenarios");
  names->callback([] {
    for (const std::string &s : builtin_scenarios())
      std::cout << s << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config;
  }
  if (!chosen)
    return ok;
  try {
    return chosen(o);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config;
  } catch (const MeshParseError &e) {
    std::cerr << "mesh error: " << e.what() << "\n";
    return mesh;
  } catch (const MeshTopologyError &e) {
    std::cerr << "mesh error: " << e.what() << "\n";
    return mesh;
  } catch (const NumericsError &e) {
    std::cerr << "numerics error: " << e.what() << "\n";
    return numerics;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return other;
  }
}
