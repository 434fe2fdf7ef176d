#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "crddme/errors.hpp"
#include "crddme/scenario.hpp"

using namespace crddme;
using nlohmann::json;

namespace {

std::string config_error_path(const json &j) {
  try {
    scenario_from_json(j);
  } catch (const ConfigError &e) {
    return e.path();
  }
  return "<no error>";
}

std::filesystem::path fresh_dir(const std::string &name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

} // namespace

TEST_SUITE("scenario") {

TEST_CASE("built-in scenarios round trip through JSON") {
  const auto names = builtin_scenarios();
  CHECK(names.size() >= 11);
  for (const std::string &n : names) {
    const ScenarioConfig c = builtin_scenario(n);
    CHECK(c.name == n);
    CHECK_NOTHROW(c.validate());
    const ScenarioConfig r = scenario_from_json(json::parse(to_json(c).dump()));
    CHECK(r == c);
    CHECK(config_hash(r) == config_hash(c));
  }
  CHECK_THROWS_AS(builtin_scenario("no-such-scenario"), ConfigError);
}

TEST_CASE("hash changes with content") {
  ScenarioConfig a = builtin_scenario("revAB-disk");
  ScenarioConfig b = a;
  b.run.master_seed += 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("errors name the offending field") {
  json j = to_json(builtin_scenario("revAB-disk"));
  j["species"][1]["diffusivty"] = 1.0;
  CHECK(config_error_path(j) == "species[1].diffusivty");

  j = to_json(builtin_scenario("revAB-disk"));
  j["species"][0]["diffusivity"] = -1.0;
  CHECK(config_error_path(j) == "species[0].diffusivity");

  j = to_json(builtin_scenario("revAB-disk"));
  j["reactions"]["bimolecular"]["c"] = "Z";
  CHECK(config_error_path(j).find("bimolecular") != std::string::npos);

  j = to_json(builtin_scenario("revAB-disk"));
  j["domain"]["level"] = "two";
  CHECK(config_error_path(j) == "domain.level");

  j = to_json(builtin_scenario("revAB-disk"));
  j["unexpected"] = 1;
  CHECK(config_error_path(j) != "<no error>");

  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
  const auto dir = fresh_dir("crddme_scenario_parse");
  std::ofstream(dir / "bad.json") << "{ \"name\": ";
  CHECK_THROWS_AS(load_scenario((dir / "bad.json").string()), ConfigError);
}

TEST_CASE("scenario files load") {
  const auto dir = fresh_dir("crddme_scenario_load");
  const ScenarioConfig c = builtin_scenario("multiparticle-disk");
  std::ofstream(dir / "s.json") << to_json(c).dump(2);
  CHECK(load_scenario((dir / "s.json").string()) == c);
}

TEST_CASE("model building and the table cache") {
  ScenarioConfig c = builtin_scenario("revAB-disk");
  c.domain.level = 0;
  c.tabulation.samples_per_pair = 200;
  const Mesh m = build_mesh(c.domain);
  const auto dir = fresh_dir("crddme_scenario_cache");
  const BuiltModel first = build_model(c, m, dir.string());
  CHECK_FALSE(first.table_cache_hit);
  CHECK(std::filesystem::exists(first.table_file));
  const BuiltModel second = build_model(c, m, dir.string());
  CHECK(second.table_cache_hit);
  CHECK(second.tables->checksum() == first.tables->checksum());
  CHECK(second.model->n_species() == 3);

  // Different tabulation settings use a different file.
  ScenarioConfig d = c;
  d.tabulation.seed = 99;
  CHECK(table_key(d, m.hash()) != table_key(c, m.hash()));

  const BuiltModel none = build_model(c, m);
  CHECK(none.table_file.empty());
  CHECK(none.tables->checksum() == first.tables->checksum());
}

TEST_CASE("initial placements and BD conversion") {
  ScenarioConfig c = builtin_scenario("is-tcr-pmhc");
  c.domain.level = 1;
  c.tabulation.samples_per_pair = 50;
  const Mesh m = build_mesh(c.domain);
  const BuiltModel b = build_model(c, m);
  // per_voxel placements only use voxels outside r = 2.
  for (const InitialPlacement &p : b.initial) {
    CHECK(p.kind == InitialPlacement::Kind::per_voxel);
    for (int v : p.voxels)
      CHECK(norm(m.node(v)) > 2.0);
  }
  const auto bd = build_bd_initial(c, m);
  REQUIRE(bd.size() == b.initial.size());
  for (std::size_t k = 0; k < bd.size(); ++k) {
    CHECK(bd[k].count == static_cast<int>(b.initial[k].voxels.size()) * b.initial[k].count);
    REQUIRE(bd[k].region);
    CHECK_FALSE(bd[k].region({0.5, 0.0}));
    CHECK(bd[k].region({3.0, 0.0}));
  }
  CHECK_NOTHROW(build_bd_config(c).validate());
}

TEST_CASE("steady specs use the manufactured solution") {
  const ScenarioConfig c = builtin_scenario("appendixA-circle-quadratic");
  REQUIRE(c.steady.has_value());
  const SteadySolveSpec s = build_steady_spec(c);
  REQUIRE(s.exact);
  // Profile "one": rho = exp(-phi).
  CHECK(s.exact({0.1, 0.2}) == doctest::Approx(std::exp(-0.05)));
  // exp(-phi) solves the homogeneous equation, leaving f = rho.
  CHECK(s.forcing({0.1, 0.2}) == doctest::Approx(std::exp(-0.05)));
  CHECK_THROWS_AS(build_steady_spec(builtin_scenario("revAB-disk")), ConfigError);
}

TEST_CASE("mesh files") {
  const auto dir = fresh_dir("crddme_scenario_mesh");
  const Mesh m = generate_mesh(DiskShape{{0, 0}, 1.0}, 1);
  {
    std::ofstream out(dir / "m.txt");
    write_mesh(out, m);
  }
  DomainConfig d;
  d.shape = "mesh";
  d.mesh_path = (dir / "m.txt").string();
  CHECK(build_mesh(d).hash() == m.hash());
  d.mesh_path = (dir / "missing.txt").string();
  CHECK_THROWS_AS(build_mesh(d), MeshParseError);
}

}
