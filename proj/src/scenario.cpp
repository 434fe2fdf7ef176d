#include "crddme/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "crddme/errors.hpp"

namespace crddme {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// JSON helpers that report the field path on failure.

void check_keys(const json &j, const std::string &path, std::initializer_list<const char *> keys) {
  if (!j.is_object())
    throw ConfigError("expected an object", path);
  for (const auto &[k, v] : j.items()) {
    bool known = false;
    for (const char *key : keys)
      known = known || k == key;
    if (!known)
      throw ConfigError("unknown field", path.empty() ? k : path + "." + k);
  }
}

std::string join(const std::string &path, const std::string &key) {
  return path.empty() ? key : path + "." + key;
}

double get_double(const json &j, const std::string &key, const std::string &path, double dflt) {
  if (!j.contains(key))
    return dflt;
  const json &v = j.at(key);
  if (!v.is_number())
    throw ConfigError("expected a number", join(path, key));
  return v.get<double>();
}

template <typename Int>
Int get_int(const json &j, const std::string &key, const std::string &path, Int dflt) {
  if (!j.contains(key))
    return dflt;
  const json &v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError("expected an integer", join(path, key));
  if constexpr (std::is_unsigned_v<Int>) {
    if (v.is_number_integer() && v.get<long long>() < 0)
      throw ConfigError("expected a non-negative integer", join(path, key));
  }
  return v.get<Int>();
}

bool get_bool(const json &j, const std::string &key, const std::string &path, bool dflt) {
  if (!j.contains(key))
    return dflt;
  if (!j.at(key).is_boolean())
    throw ConfigError("expected true or false", join(path, key));
  return j.at(key).get<bool>();
}

std::string get_string(const json &j, const std::string &key, const std::string &path,
                       const std::string &dflt) {
  if (!j.contains(key))
    return dflt;
  if (!j.at(key).is_string())
    throw ConfigError("expected a string", join(path, key));
  return j.at(key).get<std::string>();
}

Vec2 get_vec2(const json &j, const std::string &key, const std::string &path, Vec2 dflt) {
  if (!j.contains(key))
    return dflt;
  const json &v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError("expected [x, y]", join(path, key));
  return {v[0].get<double>(), v[1].get<double>()};
}

/// Either an explicit array or {"from": a, "to": b, "count": n}.
std::vector<double> get_times(const json &j, const std::string &key, const std::string &path) {
  if (!j.contains(key))
    return {};
  const json &v = j.at(key);
  const std::string p = join(path, key);
  if (v.is_array()) {
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number())
        throw ConfigError("expected a number", p + "[" + std::to_string(k) + "]");
      out.push_back(v[k].get<double>());
    }
    return out;
  }
  check_keys(v, p, {"from", "to", "count"});
  const double a = get_double(v, "from", p, 0.0);
  const double b = get_double(v, "to", p, 1.0);
  const int n = get_int<int>(v, "count", p, 2);
  if (n < 2)
    throw ConfigError("count must be at least 2", p + ".count");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    out[static_cast<std::size_t>(k)] = a + (b - a) * k / (n - 1);
  return out;
}

json vec2_json(Vec2 v) { return json::array({v.x, v.y}); }

template <typename T> bool one_of(const T &v, std::initializer_list<T> options) {
  for (const T &o : options)
    if (v == o)
      return true;
  return false;
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

void check_sorted_times(const std::vector<double> &t, const std::string &path) {
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!std::isfinite(t[k]) || t[k] < 0.0)
      throw ConfigError("times must be finite and non-negative", path + "[" + std::to_string(k) + "]");
    if (k > 0 && t[k] < t[k - 1])
      throw ConfigError("times must be sorted", path + "[" + std::to_string(k) + "]");
  }
}

std::uint64_t fnv1a(const std::string &s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

json potential_json(const PotentialConfig &p) {
  json j{{"kind", p.kind}};
  if (p.kind == "constant")
    j["c"] = p.c;
  else if (p.kind == "quadratic")
    j["scale"] = p.scale;
  else if (p.kind == "radial_piecewise") {
    j["f0"] = p.f0;
    j["r_p"] = p.r_p;
  } else if (p.kind == "linear") {
    j["c"] = p.c;
    j["g"] = vec2_json(p.g);
  } else if (p.kind == "nodal_table")
    j["values"] = p.values;
  return j;
}

} // namespace

// ---------------------------------------------------------------------------

PotentialField PotentialConfig::build() const {
  if (kind == "constant")
    return PotentialField(ConstantPotential{c});
  if (kind == "quadratic")
    return PotentialField(QuadraticPotential{scale});
  if (kind == "two_well")
    return PotentialField(TwoWellPotential{});
  if (kind == "radial_piecewise")
    return PotentialField(RadialPiecewisePotential{f0, r_p});
  if (kind == "linear")
    return PotentialField(LinearPotential{c, g});
  if (kind == "nodal_table")
    return PotentialField(NodalTablePotential{values});
  throw ConfigError("unknown potential kind '" + kind + "'");
}

bool InitialConfig::in_region(Vec2 p, Vec2 center) const {
  const double r = distance(p, center);
  if (r_min >= 0.0 && !(r > r_min))
    return false;
  if (r_max >= 0.0 && !(r <= r_max))
    return false;
  return true;
}

int ScenarioConfig::species_index(const std::string &n, const std::string &path) const {
  for (std::size_t s = 0; s < species.size(); ++s)
    if (species[s].name == n)
      return static_cast<int>(s);
  throw ConfigError("unknown species '" + n + "'", path);
}

void ScenarioConfig::validate() const {
  if (!one_of<std::string>(domain.shape, {"square", "disk", "mesh"}))
    throw ConfigError("shape must be square, disk or mesh", "domain.shape");
  if (domain.shape == "mesh") {
    if (domain.mesh_path.empty())
      throw ConfigError("mesh_path is required for shape 'mesh'", "domain.mesh_path");
  } else {
    if (!finite_positive(domain.size))
      throw ConfigError("size must be positive", "domain.size");
    if (domain.level < 0 || domain.level > 9)
      throw ConfigError("level must lie in [0, 9]", "domain.level");
  }
  if (species.empty())
    throw ConfigError("at least one species is required", "species");
  std::set<std::string> names;
  for (std::size_t s = 0; s < species.size(); ++s) {
    const SpeciesConfig &sp = species[s];
    const std::string p = "species[" + std::to_string(s) + "]";
    if (sp.name.empty())
      throw ConfigError("name must not be empty", p + ".name");
    if (!names.insert(sp.name).second)
      throw ConfigError("duplicate species name '" + sp.name + "'", p + ".name");
    if (!finite_positive(sp.diffusivity))
      throw ConfigError("diffusivity must be positive", p + ".diffusivity");
    const PotentialConfig &pc = sp.potential;
    if (!one_of<std::string>(pc.kind, {"constant", "quadratic", "two_well", "radial_piecewise",
                                       "linear", "nodal_table"}))
      throw ConfigError("unknown potential kind '" + pc.kind + "'", p + ".potential.kind");
    for (double v : {pc.c, pc.scale, pc.f0, pc.r_p, pc.g.x, pc.g.y})
      if (!std::isfinite(v))
        throw ConfigError("potential parameters must be finite", p + ".potential");
    for (double v : pc.values)
      if (!std::isfinite(v))
        throw ConfigError("nodal values must be finite", p + ".potential.values");
    for (std::size_t k = 0; k < sp.initial.size(); ++k) {
      const InitialConfig &ic = sp.initial[k];
      const std::string ip = p + ".initial[" + std::to_string(k) + "]";
      if (!one_of<std::string>(ic.kind, {"uniform", "per_voxel", "at_point"}))
        throw ConfigError("kind must be uniform, per_voxel or at_point", ip + ".kind");
      if (ic.count < 0)
        throw ConfigError("count must be non-negative", ip + ".count");
    }
  }
  if (bimolecular) {
    const BimolecularConfig &b = *bimolecular;
    const std::string p = "reactions.bimolecular";
    const int a = species_index(b.a, p + ".a");
    const int bb = species_index(b.b, p + ".b");
    if (a == bb)
      throw ConfigError("A + A reactions are not supported", p + ".b");
    if (!b.c.empty())
      species_index(b.c, p + ".c");
    if (!finite_positive(b.lambda))
      throw ConfigError("lambda must be positive", p + ".lambda");
    if (!finite_positive(b.r_b))
      throw ConfigError("r_b must be positive", p + ".r_b");
    if (!(b.gamma >= 0.0 && b.gamma <= 1.0))
      throw ConfigError("gamma must lie in [0, 1]", p + ".gamma");
    if (!one_of<std::string>(b.dissociation, {"none", "detailed_balance", "fixed_rate"}))
      throw ConfigError("dissociation must be none, detailed_balance or fixed_rate",
                        p + ".dissociation");
    if (b.dissociation != "none" && b.c.empty())
      throw ConfigError("dissociation needs a product species", p + ".c");
    if (b.dissociation == "detailed_balance" && !finite_positive(b.k_d))
      throw ConfigError("k_d must be positive", p + ".k_d");
    if (b.dissociation == "fixed_rate" && !(std::isfinite(b.mu) && b.mu >= 0.0))
      throw ConfigError("mu must be non-negative", p + ".mu");
  }
  for (std::size_t k = 0; k < linear.size(); ++k) {
    const std::string p = "reactions.linear[" + std::to_string(k) + "]";
    species_index(linear[k].from, p + ".from");
    species_index(linear[k].to, p + ".to");
    if (!(std::isfinite(linear[k].rate) && linear[k].rate >= 0.0))
      throw ConfigError("rate must be non-negative", p + ".rate");
  }
  if (tabulation.samples_per_pair < 1)
    throw ConfigError("samples_per_pair must be positive", "tabulation.samples_per_pair");
  if (!one_of<std::string>(tabulation.method, {"automatic", "product", "ball"}))
    throw ConfigError("method must be automatic, product or ball", "tabulation.method");
  if (!finite_positive(run.t_end))
    throw ConfigError("t_end must be positive", "run.t_end");
  if (run.n_realizations < 1)
    throw ConfigError("n_realizations must be positive", "run.n_realizations");
  check_sorted_times(run.t_grid, "run.t_grid");
  check_sorted_times(run.snapshot_times, "run.snapshot_times");
  if (!finite_positive(bd.dt))
    throw ConfigError("dt must be positive", "bd.dt");
  if (bd.max_skip < 1)
    throw ConfigError("max_skip must be at least 1", "bd.max_skip");
  if (steady) {
    if (!one_of<std::string>(steady->profile, {"one", "cos2pi"}))
      throw ConfigError("profile must be one or cos2pi", "steady.profile");
    if (steady->min_level < 0 || steady->max_level > 9 || steady->max_level <= steady->min_level)
      throw ConfigError("need 0 <= min_level < max_level <= 9", "steady");
  }
}

json to_json(const ScenarioConfig &c) {
  json j;
  j["name"] = c.name;
  j["domain"] = {{"shape", c.domain.shape},
                 {"center", vec2_json(c.domain.center)},
                 {"size", c.domain.size},
                 {"level", c.domain.level},
                 {"mesh_path", c.domain.mesh_path}};
  j["species"] = json::array();
  for (const SpeciesConfig &s : c.species) {
    json sj{{"name", s.name}, {"diffusivity", s.diffusivity}, {"potential", potential_json(s.potential)}};
    sj["initial"] = json::array();
    for (const InitialConfig &ic : s.initial) {
      json ij{{"kind", ic.kind}, {"count", ic.count}};
      if (ic.r_min >= 0.0)
        ij["r_min"] = ic.r_min;
      if (ic.r_max >= 0.0)
        ij["r_max"] = ic.r_max;
      if (ic.kind == "at_point")
        ij["point"] = vec2_json(ic.point);
      sj["initial"].push_back(ij);
    }
    j["species"].push_back(sj);
  }
  json r = json::object();
  if (c.bimolecular) {
    const BimolecularConfig &b = *c.bimolecular;
    r["bimolecular"] = {{"a", b.a},         {"b", b.b},         {"c", b.c},
                        {"lambda", b.lambda}, {"r_b", b.r_b},     {"gamma", b.gamma},
                        {"dissociation", b.dissociation}, {"k_d", b.k_d}, {"mu", b.mu}};
  }
  r["linear"] = json::array();
  for (const LinearConfig &l : c.linear)
    r["linear"].push_back({{"from", l.from}, {"to", l.to}, {"rate", l.rate}});
  j["reactions"] = r;
  j["tabulation"] = {{"samples_per_pair", c.tabulation.samples_per_pair},
                     {"seed", c.tabulation.seed},
                     {"method", c.tabulation.method}};
  j["run"] = {{"t_end", c.run.t_end},
              {"n_realizations", c.run.n_realizations},
              {"master_seed", c.run.master_seed},
              {"binding_times", c.run.binding_times},
              {"t_grid", c.run.t_grid},
              {"snapshot_times", c.run.snapshot_times}};
  j["bd"] = {{"dt", c.bd.dt}, {"max_skip", c.bd.max_skip}};
  if (c.steady)
    j["steady"] = {{"profile", c.steady->profile},
                   {"min_level", c.steady->min_level},
                   {"max_level", c.steady->max_level}};
  return j;
}

ScenarioConfig scenario_from_json(const json &j) {
  check_keys(j, "", {"name", "domain", "species", "reactions", "tabulation", "run", "bd", "steady"});
  ScenarioConfig c;
  c.name = get_string(j, "name", "", "");
  if (!j.contains("domain"))
    throw ConfigError("missing", "domain");
  {
    const json &d = j.at("domain");
    check_keys(d, "domain", {"shape", "center", "size", "level", "mesh_path"});
    c.domain.shape = get_string(d, "shape", "domain", "disk");
    c.domain.center = get_vec2(d, "center", "domain", {});
    c.domain.size = get_double(d, "size", "domain", 1.0);
    c.domain.level = get_int<int>(d, "level", "domain", 1);
    c.domain.mesh_path = get_string(d, "mesh_path", "domain", "");
  }
  if (!j.contains("species") || !j.at("species").is_array())
    throw ConfigError("expected an array", "species");
  for (std::size_t s = 0; s < j.at("species").size(); ++s) {
    const json &sj = j.at("species")[s];
    const std::string p = "species[" + std::to_string(s) + "]";
    check_keys(sj, p, {"name", "diffusivity", "potential", "initial"});
    SpeciesConfig sp;
    sp.name = get_string(sj, "name", p, "");
    sp.diffusivity = get_double(sj, "diffusivity", p, 1.0);
    if (sj.contains("potential")) {
      const json &pj = sj.at("potential");
      const std::string pp = p + ".potential";
      check_keys(pj, pp, {"kind", "c", "scale", "f0", "r_p", "g", "values"});
      sp.potential.kind = get_string(pj, "kind", pp, "constant");
      sp.potential.c = get_double(pj, "c", pp, 0.0);
      sp.potential.scale = get_double(pj, "scale", pp, 1.0);
      sp.potential.f0 = get_double(pj, "f0", pp, 1.0);
      sp.potential.r_p = get_double(pj, "r_p", pp, 4.0);
      sp.potential.g = get_vec2(pj, "g", pp, {});
      sp.potential.values = get_times(pj, "values", pp);
    }
    if (sj.contains("initial")) {
      if (!sj.at("initial").is_array())
        throw ConfigError("expected an array", p + ".initial");
      for (std::size_t k = 0; k < sj.at("initial").size(); ++k) {
        const json &ij = sj.at("initial")[k];
        const std::string ip = p + ".initial[" + std::to_string(k) + "]";
        check_keys(ij, ip, {"kind", "count", "r_min", "r_max", "point"});
        InitialConfig ic;
        ic.kind = get_string(ij, "kind", ip, "uniform");
        ic.count = get_int<int>(ij, "count", ip, 1);
        ic.r_min = get_double(ij, "r_min", ip, -1.0);
        ic.r_max = get_double(ij, "r_max", ip, -1.0);
        ic.point = get_vec2(ij, "point", ip, {});
        sp.initial.push_back(ic);
      }
    }
    c.species.push_back(sp);
  }
  if (j.contains("reactions")) {
    const json &r = j.at("reactions");
    check_keys(r, "reactions", {"bimolecular", "linear"});
    if (r.contains("bimolecular") && !r.at("bimolecular").is_null()) {
      const json &b = r.at("bimolecular");
      const std::string p = "reactions.bimolecular";
      check_keys(b, p, {"a", "b", "c", "lambda", "r_b", "gamma", "dissociation", "k_d", "mu"});
      BimolecularConfig bc;
      bc.a = get_string(b, "a", p, "");
      bc.b = get_string(b, "b", p, "");
      bc.c = get_string(b, "c", p, "");
      bc.lambda = get_double(b, "lambda", p, 0.0);
      bc.r_b = get_double(b, "r_b", p, 0.0);
      bc.gamma = get_double(b, "gamma", p, 0.5);
      bc.dissociation = get_string(b, "dissociation", p, "none");
      bc.k_d = get_double(b, "k_d", p, 1.0);
      bc.mu = get_double(b, "mu", p, 0.0);
      c.bimolecular = bc;
    }
    if (r.contains("linear")) {
      if (!r.at("linear").is_array())
        throw ConfigError("expected an array", "reactions.linear");
      for (std::size_t k = 0; k < r.at("linear").size(); ++k) {
        const json &l = r.at("linear")[k];
        const std::string p = "reactions.linear[" + std::to_string(k) + "]";
        check_keys(l, p, {"from", "to", "rate"});
        c.linear.push_back({get_string(l, "from", p, ""), get_string(l, "to", p, ""),
                            get_double(l, "rate", p, 0.0)});
      }
    }
  }
  if (j.contains("tabulation")) {
    const json &t = j.at("tabulation");
    check_keys(t, "tabulation", {"samples_per_pair", "seed", "method"});
    c.tabulation.samples_per_pair = get_int<int>(t, "samples_per_pair", "tabulation", 2000);
    c.tabulation.seed = get_int<std::uint64_t>(t, "seed", "tabulation", 1);
    c.tabulation.method = get_string(t, "method", "tabulation", "automatic");
  }
  if (j.contains("run")) {
    const json &r = j.at("run");
    check_keys(r, "run", {"t_end", "n_realizations", "master_seed", "binding_times", "t_grid",
                          "snapshot_times"});
    c.run.t_end = get_double(r, "t_end", "run", 1.0);
    c.run.n_realizations = get_int<std::size_t>(r, "n_realizations", "run", 1000);
    c.run.master_seed = get_int<std::uint64_t>(r, "master_seed", "run", 1);
    c.run.binding_times = get_bool(r, "binding_times", "run", false);
    c.run.t_grid = get_times(r, "t_grid", "run");
    c.run.snapshot_times = get_times(r, "snapshot_times", "run");
  }
  if (j.contains("bd")) {
    const json &b = j.at("bd");
    check_keys(b, "bd", {"dt", "max_skip"});
    c.bd.dt = get_double(b, "dt", "bd", 1e-10);
    c.bd.max_skip = get_int<int>(b, "max_skip", "bd", 10000);
  }
  if (j.contains("steady") && !j.at("steady").is_null()) {
    const json &s = j.at("steady");
    check_keys(s, "steady", {"profile", "min_level", "max_level"});
    SteadyConfig sc;
    sc.profile = get_string(s, "profile", "steady", "one");
    sc.min_level = get_int<int>(s, "min_level", "steady", 0);
    sc.max_level = get_int<int>(s, "max_level", "steady", 5);
    c.steady = sc;
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open scenario file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

std::uint64_t config_hash(const ScenarioConfig &c) { return fnv1a(to_json(c).dump()); }

// ---------------------------------------------------------------------------
// Built-in scenarios

std::vector<std::string> builtin_scenarios() {
  return {"annihilation-square",
          "annihilation-disk",
          "revAB-disk",
          "multiparticle-disk",
          "is-tcr-pmhc",
          "appendixA-square-quadratic",
          "appendixA-circle-quadratic",
          "appendixA-square-quadratic30",
          "appendixA-circle-quadratic30",
          "appendixA-square-twowell",
          "appendixA-circle-twowell"};
}

namespace {

SpeciesConfig species(const std::string &name, double d, PotentialConfig pot,
                      std::vector<InitialConfig> init = {}) {
  return {name, d, std::move(pot), std::move(init)};
}

PotentialConfig quadratic(double s) {
  PotentialConfig p;
  p.kind = "quadratic";
  p.scale = s;
  return p;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    v[static_cast<std::size_t>(k)] = a + (b - a) * k / (n - 1);
  return v;
}

} // namespace

ScenarioConfig builtin_scenario(const std::string &name) {
  ScenarioConfig c;
  c.name = name;
  const InitialConfig one_uniform{};
  if (name == "annihilation-square" || name == "annihilation-disk") {
    if (name == "annihilation-square")
      c.domain = {"square", {0.0, 0.0}, 0.1, 1, ""};
    else
      c.domain = {"disk", {0.05, 0.05}, 0.1, 1, ""};
    c.species = {species("A", 10.0, quadratic(1.0), {one_uniform}),
                 species("B", 10.0, quadratic(1.0), {one_uniform})};
    BimolecularConfig b;
    b.a = "A";
    b.b = "B";
    b.lambda = 1e9;
    b.r_b = 0.001;
    c.bimolecular = b;
    c.run.t_end = 1e3;
    c.run.n_realizations = 10000;
    c.run.binding_times = true;
    c.bd.dt = 1e-10;
  } else if (name == "revAB-disk") {
    c.domain = {"disk", {0.05, 0.05}, 0.1, 1, ""};
    c.species = {species("A", 0.1, quadratic(1.0)), species("B", 0.1, quadratic(1.0)),
                 species("C", 0.1, quadratic(1.0), {one_uniform})};
    BimolecularConfig b;
    b.a = "A";
    b.b = "B";
    b.c = "C";
    b.lambda = 1e6;
    b.r_b = 0.001;
    b.gamma = 0.5;
    b.dissociation = "detailed_balance";
    b.k_d = 2.0;
    c.bimolecular = b;
    c.run.t_end = 0.1;
    c.run.n_realizations = 10000;
    c.run.t_grid = linspace(0.0, 0.1, 101);
    c.bd.dt = 1e-10;
  } else if (name == "multiparticle-disk") {
    c.domain = {"disk", {0.5, 0.5}, 0.1, 1, ""};
    InitialConfig ten{};
    ten.count = 10;
    c.species = {species("A", 0.1, quadratic(1.0), {ten}), species("B", 0.1, quadratic(1.0), {ten}),
                 species("C", 0.1, quadratic(1.0))};
    BimolecularConfig b;
    b.a = "A";
    b.b = "B";
    b.c = "C";
    b.lambda = 1e5;
    b.r_b = 0.001;
    b.dissociation = "detailed_balance";
    b.k_d = 2.0;
    c.bimolecular = b;
    c.linear = {{"A", "B", 10.0}, {"B", "A", 5.0}};
    c.run.t_end = 1.0;
    c.run.n_realizations = 100;
    c.run.t_grid = linspace(0.0, 1.0, 101);
    c.bd.dt = 1e-10;
  } else if (name == "is-tcr-pmhc") {
    c.domain = {"disk", {0.0, 0.0}, 5.6, 3, ""};
    InitialConfig outside;
    outside.kind = "per_voxel";
    outside.count = 10;
    outside.r_min = 2.0;
    PotentialConfig flat;
    PotentialConfig radial;
    radial.kind = "radial_piecewise";
    radial.f0 = 1.0;
    radial.r_p = 4.0;
    c.species = {species("TCR", 0.1, flat, {outside}), species("pMHC", 0.1, flat, {outside}),
                 species("TCR-pMHC", 0.06, radial)};
    BimolecularConfig b;
    b.a = "TCR";
    b.b = "pMHC";
    b.c = "TCR-pMHC";
    b.lambda = 2e5 / 6.023;
    b.r_b = 0.015;
    b.dissociation = "fixed_rate";
    b.mu = 0.1;
    c.bimolecular = b;
    c.run.t_end = 20.0;
    c.run.n_realizations = 1;
    c.run.snapshot_times = {0.0, 0.1, 1.5, 3.0, 9.0, 20.0};
    c.run.t_grid = linspace(0.0, 20.0, 201);
  } else if (name.rfind("appendixA-", 0) == 0) {
    const std::string rest = name.substr(10);
    const auto dash = rest.find('-');
    const std::string dom = rest.substr(0, dash);
    const std::string pot = dash == std::string::npos ? "" : rest.substr(dash + 1);
    if ((dom != "square" && dom != "circle") ||
        (pot != "quadratic" && pot != "quadratic30" && pot != "twowell"))
      throw ConfigError("unknown scenario '" + name + "'");
    const bool square = dom == "square";
    if (pot == "twowell")
      c.domain = square ? DomainConfig{"square", {0.0, 0.0}, 1.0, 0, ""}
                        : DomainConfig{"disk", {0.0, 0.0}, 1.0, 0, ""};
    else
      c.domain = square ? DomainConfig{"square", {0.5, 0.5}, 2.0, 0, ""}
                        : DomainConfig{"disk", {-0.5, 0.0}, 1.0, 0, ""};
    PotentialConfig p;
    if (pot == "twowell")
      p.kind = "two_well";
    else
      p = quadratic(pot == "quadratic30" ? 30.0 : 1.0);
    c.species = {species("rho", square ? 1.0 : 10.0, p)};
    c.steady = SteadyConfig{square ? "cos2pi" : "one", 0, 5};
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Model construction

Shape domain_shape(const DomainConfig &d) {
  if (d.shape == "square")
    return SquareShape{d.center, d.size};
  if (d.shape == "disk")
    return DiskShape{d.center, d.size};
  throw ConfigError("domain shape '" + d.shape + "' has no analytic form", "domain.shape");
}

Mesh build_mesh(const DomainConfig &d) {
  if (d.shape == "mesh")
    return load_mesh(d.mesh_path);
  return generate_mesh(domain_shape(d), d.level);
}

std::vector<RateOperator> build_hops(const ScenarioConfig &c, const Mesh &mesh,
                                     const DualCells &duals) {
  std::vector<RateOperator> hops;
  for (const SpeciesConfig &s : c.species) {
    const StiffnessMatrix st =
        assemble_eafe_stiffness(mesh, s.potential.build(), Diffusivity(s.diffusivity));
    hops.push_back(transition_rate_matrix(st, duals, s.name));
  }
  return hops;
}

std::uint64_t table_key(const ScenarioConfig &c, std::uint64_t mesh_hash) {
  json k;
  k["mesh_hash"] = mesh_hash;
  k["bimolecular"] = to_json(c)["reactions"].value("bimolecular", json());
  k["tabulation"] = to_json(c)["tabulation"];
  if (c.bimolecular) {
    k["potentials"] = json::array();
    for (const std::string &n : {c.bimolecular->a, c.bimolecular->b, c.bimolecular->c})
      if (!n.empty())
        k["potentials"].push_back(
            potential_json(c.species[static_cast<std::size_t>(c.species_index(n, ""))].potential));
  }
  return fnv1a(k.dump());
}

BuiltModel build_model(const ScenarioConfig &c, const Mesh &mesh, const std::string &cache_dir) {
  c.validate();
  BuiltModel b;
  b.mesh = mesh;
  b.duals = dual_cells(mesh);
  for (const SpeciesConfig &s : c.species)
    b.nodal_phi.push_back(s.potential.build().nodal_values(mesh));
  auto model = std::make_shared<ReactionModel>();
  for (const SpeciesConfig &s : c.species)
    model->species.push_back(s.name);
  model->hops = build_hops(c, mesh, b.duals);

  if (c.bimolecular) {
    const BimolecularConfig &bc = *c.bimolecular;
    const int ia = c.species_index(bc.a, "reactions.bimolecular.a");
    const int ib = c.species_index(bc.b, "reactions.bimolecular.b");
    const int ic = bc.c.empty() ? -1 : c.species_index(bc.c, "reactions.bimolecular.c");
    ReactionTables tables;
    tables.kernel = {bc.lambda, bc.r_b, bc.gamma};
    if (bc.dissociation == "fixed_rate")
      tables.mode = FixedRateMode{bc.mu};
    else
      tables.mode = DetailedBalanceMode{bc.k_d};
    tables.options.samples_per_pair = c.tabulation.samples_per_pair;
    tables.options.seed = c.tabulation.seed;
    tables.options.method = c.tabulation.method == "product" ? TabulationOptions::Method::product
                            : c.tabulation.method == "ball"  ? TabulationOptions::Method::ball
                                                             : TabulationOptions::Method::automatic;
    bool loaded = false;
    if (!cache_dir.empty()) {
      char name[64];
      std::snprintf(name, sizeof name, "tables-%016llx.txt",
                    static_cast<unsigned long long>(table_key(c, mesh.hash())));
      b.table_file = (std::filesystem::path(cache_dir) / name).string();
      std::ifstream in(b.table_file);
      if (in) {
        ReactionTables cached = read_tables(in, mesh.hash());
        if (cached.association.n_voxels == mesh.num_nodes()) {
          tables = std::move(cached);
          loaded = true;
          b.table_cache_hit = true;
        }
      }
    }
    if (!loaded) {
      tables.association = tabulate_association(mesh, b.duals, tables.kernel, tables.options,
                                                 &b.warnings);
      if (bc.dissociation != "none")
        tables.dissociation = tabulate_dissociation(
            tables.association, b.duals.volumes, b.nodal_phi[static_cast<std::size_t>(ia)],
            b.nodal_phi[static_cast<std::size_t>(ib)], b.nodal_phi[static_cast<std::size_t>(ic)],
            tables.mode);
      else
        tables.dissociation.n_voxels = mesh.num_nodes();
      if (!b.table_file.empty()) {
        std::filesystem::create_directories(cache_dir);
        std::ofstream out(b.table_file);
        write_tables(out, tables, mesh.hash());
      }
    }
    BimolecularReaction br;
    br.a = ia;
    br.b = ib;
    br.c = ic;
    br.association = std::make_shared<const AssociationTable>(tables.association);
    if (bc.dissociation != "none")
      br.dissociation = std::make_shared<const DissociationTable>(tables.dissociation);
    model->bimolecular = br;
    b.tables = std::move(tables);
  }
  for (const LinearConfig &l : c.linear)
    model->linear.push_back({c.species_index(l.from, "reactions.linear.from"),
                             c.species_index(l.to, "reactions.linear.to"), l.rate});
  model->validate();
  b.model = model;

  std::optional<PointLocator> locator;
  for (std::size_t s = 0; s < c.species.size(); ++s)
    for (const InitialConfig &ic : c.species[s].initial) {
      InitialPlacement p;
      p.species = static_cast<int>(s);
      p.count = ic.count;
      const bool region = ic.r_min >= 0.0 || ic.r_max >= 0.0;
      if (ic.kind == "at_point") {
        if (!locator)
          locator.emplace(b.mesh);
        p.kind = InitialPlacement::Kind::at_voxel;
        p.voxel = locator->locate_cell_or_nearest(ic.point);
      } else {
        p.kind = ic.kind == "uniform" ? InitialPlacement::Kind::uniform_by_area
                                      : InitialPlacement::Kind::per_voxel;
        if (region) {
          for (int v = 0; v < mesh.num_nodes(); ++v)
            if (ic.in_region(mesh.node(v), c.domain.center))
              p.voxels.push_back(v);
          if (p.voxels.empty())
            throw ConfigError("initial region contains no voxel",
                              "species[" + std::to_string(s) + "].initial");
        }
      }
      b.initial.push_back(std::move(p));
    }
  return b;
}

BDConfig build_bd_config(const ScenarioConfig &c) {
  BDConfig b;
  b.domain = domain_shape(c.domain);
  for (const SpeciesConfig &s : c.species)
    b.species.push_back({s.name, s.diffusivity, s.potential.build()});
  if (c.bimolecular) {
    const BimolecularConfig &bc = *c.bimolecular;
    BDBimolecular bi;
    bi.a = c.species_index(bc.a, "reactions.bimolecular.a");
    bi.b = c.species_index(bc.b, "reactions.bimolecular.b");
    bi.c = bc.c.empty() ? -1 : c.species_index(bc.c, "reactions.bimolecular.c");
    bi.kernel = {bc.lambda, bc.r_b, bc.gamma};
    if (bc.dissociation == "detailed_balance")
      bi.dissociation = DetailedBalanceMode{bc.k_d};
    else if (bc.dissociation == "fixed_rate")
      bi.dissociation = FixedRateMode{bc.mu};
    b.bimolecular = bi;
  }
  for (const LinearConfig &l : c.linear)
    b.linear.push_back({c.species_index(l.from, ""), c.species_index(l.to, ""), l.rate});
  b.dt = c.bd.dt;
  b.max_skip = c.bd.max_skip;
  return b;
}

std::vector<BDInitial> build_bd_initial(const ScenarioConfig &c, const Mesh &mesh) {
  std::vector<BDInitial> out;
  const Vec2 center = c.domain.center;
  for (std::size_t s = 0; s < c.species.size(); ++s)
    for (const InitialConfig &ic : c.species[s].initial) {
      BDInitial b;
      b.species = static_cast<int>(s);
      b.count = ic.count;
      if (ic.kind == "at_point") {
        b.point = ic.point;
      } else {
        if (ic.r_min >= 0.0 || ic.r_max >= 0.0)
          b.region = [ic, center](Vec2 p) { return ic.in_region(p, center); };
        if (ic.kind == "per_voxel") {
          int voxels = 0;
          for (int v = 0; v < mesh.num_nodes(); ++v)
            voxels += ic.in_region(mesh.node(v), center) ? 1 : 0;
          b.count = ic.count * voxels;
        }
      }
      out.push_back(std::move(b));
    }
  return out;
}

SteadySolveSpec build_steady_spec(const ScenarioConfig &c) {
  if (!c.steady)
    throw ConfigError("scenario has no steady study", "steady");
  const SpeciesConfig &s = c.species.front();
  SteadySolveSpec spec;
  spec.potential = s.potential.build();
  const double d = s.diffusivity;
  spec.d = Diffusivity(d);
  const PotentialField phi = spec.potential;
  const bool trig = c.steady->profile == "cos2pi";
  constexpr double tp = 2.0 * std::numbers::pi;
  // rho = exp(-phi) g solves the problem with
  // f = -D exp(-phi) (lap g - grad phi . grad g) + exp(-phi) g.
  spec.exact = [phi, trig](Vec2 p) {
    const double g = trig ? std::cos(tp * p.x) * std::cos(tp * p.y) : 1.0;
    return std::exp(-phi.value(p)) * g;
  };
  spec.forcing = [phi, trig, d](Vec2 p) {
    const double e = std::exp(-phi.value(p));
    if (!trig)
      return e;
    const double cx = std::cos(tp * p.x), sx = std::sin(tp * p.x);
    const double cy = std::cos(tp * p.y), sy = std::sin(tp * p.y);
    const double g = cx * cy;
    const Vec2 grad_g{-tp * sx * cy, -tp * cx * sy};
    const double lap_g = -2.0 * tp * tp * g;
    return -d * e * (lap_g - dot(phi.gradient(p), grad_g)) + e * g;
  };
  return spec;
}

} // namespace crddme
