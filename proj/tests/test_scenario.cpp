#include "oracles.hpp"

#include "tlfea/output.hpp"
#include "tlfea/runner.hpp"
#include "tlfea/scenario.hpp"

#include <doctest.h>

#include <charconv>
#include <fstream>
#include <sstream>

using namespace tlfea;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

json minimal_doc() {
  json nodes = json::array();
  for (const auto& x : oracle::tet10_nodes(oracle::default_tet_corners())) nodes.push_back(vec(x));
  json j;
  j["name"] = "single_tet";
  j["solver"] = {{"h", 1e-3}, {"steps", 5}};
  j["materials"] = {{"rubber", {{"model", "svk"}, {"E", 1e6}, {"nu", 0.3}, {"density", 1000}}}};
  j["bodies"] = json::array({{{"name", "t"},
                              {"material", "rubber"},
                              {"mesh", {{"kind", "tet10"}, {"nodes", nodes}, {"elements", json::array({json::array({0, 1, 2, 3, 4, 5, 6, 7, 8, 9})})}}}}});
  j["loads"] = {{"gravity", vec(Vec3(0, 0, -9.81))}};
  j["output"] = {{"every", 1},
                 {"probes", json::array({{{"name", "apex"}, {"point", {{"body", "t"}, {"node", 3}}}},
                                         {{"name", "base"}, {"point", {{"body", "t"}, {"node", 0}}}}})}};
  return j;
}

ScenarioError::Kind error_kind(const json& doc) {
  try {
    build_scenario(parse_scenario(doc));
  } catch (const ScenarioError& e) {
    return e.kind();
  }
  FAIL("document was accepted");
  return ScenarioError::Kind::Syntax;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tlfea_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("minimal tet scenario parses and builds") {
    const auto s = parse_scenario(minimal_doc());
    CHECK(s.name == "single_tet");
    CHECK(s.steps == 5);
    REQUIRE(s.bodies.size() == 1);
    CHECK(s.bodies[0].mesh.node_count() == 10);
    REQUIRE(s.fields.size() == 1);
    CHECK(s.fields[0].field.b0 == Vec3(0, 0, -9.81));
    const auto& svk = std::get<SvkParams>(s.materials.at("rubber").spec.elastic);
    const auto ref = lame_from_young(1e6, 0.3);
    CHECK(svk.lambda == ref.lambda);
    CHECK(svk.mu == ref.mu);
    const auto b = build_scenario(s);
    CHECK(b.problem.model.slot_count() == 10);
    CHECK(b.probes.size() == 2);
    CHECK(b.probes[0].first == "apex");
    CHECK(b.q0 == b.problem.model.reference_q());
  }

  TEST_CASE("unknown body reference names the id and the location") {
    auto doc = minimal_doc();
    doc["output"]["probes"][1]["point"]["body"] = "nosuchbody";
    try {
      parse_scenario(doc);
      FAIL("accepted");
    } catch (const ScenarioError& e) {
      CHECK(e.kind() == ScenarioError::Kind::Reference);
      CHECK(std::string(e.what()).find("nosuchbody") != std::string::npos);
      CHECK(e.path() == "/output/probes/1/point");
    }
  }

  TEST_CASE("round trip through the explicit form") {
    const auto s = parse_scenario(minimal_doc());
    CHECK(parse_scenario(to_json(s)) == s);
    for (const auto* name : {"pendulum", "cantilever", "shell_flutter", "sphere_drop"}) {
      CAPTURE(name);
      const auto b = load_scenario(fs::path(TLFEA_SCENARIO_DIR) / (std::string(name) + ".json"));
      CHECK(parse_scenario(to_json(b)) == b);
      CHECK(parse_scenario(json::parse(to_json(b).dump())) == b);
    }
  }

  TEST_CASE("overrides") {
    auto doc = minimal_doc();
    doc["solver"].erase("steps");
    doc["solver"]["t_end"] = 0.01;
    const auto base = parse_scenario(doc);
    CHECK(base.steps == 10);
    apply_override(doc, "solver.h=5e-4");
    const auto half = parse_scenario(doc);
    CHECK(half.steps == 20);
    CHECK(half.solver.h == 5e-4);
    apply_override(doc, "solver.line_search=backtracking");
    CHECK(parse_scenario(doc).solver.line_search.kind == LineSearchConfig::Kind::Backtracking);
    apply_override(doc, "bodies.0.name=other");
    CHECK(doc["bodies"][0]["name"] == "other");
    CHECK_THROWS_AS(apply_override(doc, "novalue"), ScenarioError);
    CHECK_THROWS_AS(apply_override(doc, "bodies.7.name=x"), ScenarioError);

    const fs::path dir = scratch("override");
    fs::create_directories(dir);
    std::ofstream(dir / "s.json") << minimal_doc().dump(2);
    CHECK(load_scenario(dir / "s.json", {"solver.steps=42"}).steps == 42);
  }

  TEST_CASE("each kind of invalid document is reported with its kind") {
    using K = ScenarioError::Kind;
    {
      const fs::path dir = scratch("syntax");
      fs::create_directories(dir);
      std::ofstream(dir / "bad.json") << "{\n  \"name\": \"x\",\n  \"solver\": {,\n}";
      try {
        load_scenario(dir / "bad.json");
        FAIL("accepted");
      } catch (const ScenarioError& e) {
        CHECK(e.kind() == K::Syntax);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
      }
      CHECK_THROWS_AS(load_scenario(dir / "missing.json"), ScenarioError);
    }
    auto doc = minimal_doc();
    doc["solver"]["bogus"] = 1;
    CHECK(error_kind(doc) == K::Schema);
    doc = minimal_doc();
    doc["solver"]["h"] = "fast";
    CHECK(error_kind(doc) == K::Schema);
    doc = minimal_doc();
    doc["solver"]["t_end"] = 1.0;  // both steps and t_end
    CHECK(error_kind(doc) == K::Schema);
    doc = minimal_doc();
    doc["bodies"][0]["material"] = "steel";
    CHECK(error_kind(doc) == K::Reference);
    doc = minimal_doc();
    doc["output"]["probes"][0]["point"]["node"] = 10;
    CHECK(error_kind(doc) == K::Reference);
    doc = minimal_doc();
    doc["bodies"][0]["mesh"]["elements"][0][9] = 0;
    CHECK(error_kind(doc) == K::Physical);
    doc = minimal_doc();
    doc["bodies"][0]["mesh"]["nodes"][3] = vec(Vec3(0.05, 0.05, 0));  // coplanar corners
    CHECK(error_kind(doc) == K::Physical);
    doc = minimal_doc();
    doc["materials"]["rubber"]["nu"] = 0.5;
    CHECK(error_kind(doc) == K::Physical);
    doc = minimal_doc();
    doc["materials"]["rubber"]["density"] = 0;
    CHECK(error_kind(doc) == K::Physical);
    doc = minimal_doc();
    doc["constraints"] = json::array({{{"type", "dist"},
                                       {"points", json::array({{{"body", "t"}, {"node", 0}}, {{"ground", vec(Vec3::Zero())}}})},
                                       {"f", 0.0}}});
    CHECK(error_kind(doc) == K::Physical);
    doc = minimal_doc();
    doc["joints"] = json::array({{{"type", "hinge"}, {"point", {{"body", "t"}, {"node", 0}}}}});
    CHECK(error_kind(doc) == K::Schema);
  }

  TEST_CASE("run output: headers, probe order, row counts, ledger signs") {
    const fs::path out = scratch("run");
    RunOptions opts;
    opts.out_dir = out;
    const auto s = parse_scenario(minimal_doc());
    const auto r = run_scenario(s, opts);
    REQUIRE(r.exit_code == kExitOk);
    CHECK(r.steps_completed == 5);
    CHECK(r.frames_written == 5);

    const auto energy = lines(out / "energy.csv");
    REQUIRE(energy.size() == 6);
    CHECK(energy[0] == "step,time,kinetic,elastic,potential,mechanical,dissipated,constraint_impulse,c_norm,"
                       "newton_iterations,alm_iterations,substeps");
    for (std::size_t k = 1; k < energy.size(); ++k) {
      const auto f = split(energy[k]);
      REQUIRE(f.size() == 12);
      CHECK(f[0] == std::to_string(k));
      CHECK(std::stod(f[2]) >= 0.0);
    }
    // Falling body: kinetic energy grows.
    CHECK(std::stod(split(energy[5])[2]) > std::stod(split(energy[1])[2]));

    const auto probes = lines(out / "probes.csv");
    REQUIRE(probes.size() == 6);
    CHECK(probes[0] == "step,time,apex_x,apex_y,apex_z,base_x,base_y,base_z");
    const auto row = split(probes[5]);
    const auto nodes = oracle::tet10_nodes(oracle::default_tet_corners());
    CHECK(std::stod(row[4]) < nodes[3].z());
    CHECK(std::stod(row[5]) == doctest::Approx(nodes[0].x()).epsilon(1e-9));

    CHECK(lines(out / "contacts.csv") == std::vector<std::string>{"step,time,pair,delta,fn_x,fn_y,fn_z,ft_x,ft_y,ft_z"});
    const auto fin = lines(out / "final_state.csv");
    CHECK(fin.size() == 11);
    CHECK(fin[0] == "body,node,slot,qx,qy,qz,vx,vy,vz");
  }

  TEST_CASE("frame cadence, frame limit and snapshots") {
    auto doc = minimal_doc();
    doc["output"]["every"] = 2;
    doc["output"]["snapshot_every"] = 2;
    doc["solver"]["steps"] = 9;
    const auto s = parse_scenario(doc);
    const fs::path out = scratch("cadence");
    RunOptions opts;
    opts.out_dir = out;
    auto r = run_scenario(s, opts);
    CHECK(r.steps_completed == 9);
    CHECK(r.frames_written == 4);
    CHECK(lines(out / "energy.csv").size() == 5);
    CHECK(split(lines(out / "energy.csv")[1])[0] == "2");
    CHECK(fs::exists(out / "snapshots" / "frame_000004.vtk"));
    CHECK(fs::exists(out / "snapshots" / "frame_000008.vtk"));
    CHECK_FALSE(fs::exists(out / "snapshots" / "frame_000002.vtk"));

    opts.frames = 2;
    opts.out_dir = scratch("frames");
    r = run_scenario(s, opts);
    CHECK(r.frames_written == 2);
    CHECK(r.steps_completed == 4);
  }

  TEST_CASE("VTK snapshot layout") {
    Model m;
    m.add_body("t", oracle::tet_mesh(), oracle::svk_material(), 1000);
    m.add_body("b", oracle::beam_mesh(3, 1, 0.1, 0.1), oracle::svk_material(), 1000);
    m.add_body("s", oracle::shell_mesh(2, 1, 1, 1, 0.01), oracle::svk_material(), 1000);
    const fs::path dir = scratch("vtk");
    fs::create_directories(dir);
    write_vtk(dir / "m.vtk", m, m.reference_q(), "test");
    const auto l = lines(dir / "m.vtk");
    REQUIRE(l.size() > 5);
    CHECK(l[0] == "# vtk DataFile Version 3.0");
    CHECK(l[4] == "POINTS " + std::to_string(10 + 4 + 6) + " double");
    const auto cells = std::find_if(l.begin(), l.end(), [](const std::string& x) { return x.rfind("CELLS", 0) == 0; });
    REQUIRE(cells != l.end());
    CHECK(*cells == "CELLS 6 " + std::to_string(11 + 3 * 3 + 2 * 5));
  }

  TEST_CASE("identical runs write identical bytes") {
    auto doc = minimal_doc();
    doc["solver"]["steps"] = 20;
    doc["output"]["snapshot_every"] = 5;
    const auto s = parse_scenario(doc);
    RunOptions a, b;
    a.out_dir = scratch("det_a");
    b.out_dir = scratch("det_b");
    REQUIRE(run_scenario(s, a).exit_code == kExitOk);
    REQUIRE(run_scenario(s, b).exit_code == kExitOk);
    for (const auto* f : {"energy.csv", "probes.csv", "contacts.csv", "final_state.csv", "snapshots/frame_000020.vtk"}) {
      CAPTURE(f);
      CHECK(slurp(a.out_dir / f) == slurp(b.out_dir / f));
      CHECK_FALSE(slurp(a.out_dir / f).empty());
    }
  }

  TEST_CASE("exit codes for solver and output failures") {
    // An initial displacement that pushes the apex through the base inverts the element.
    auto doc = minimal_doc();
    json d = json::array();
    for (int k = 0; k < 10; ++k) d.push_back(vec(Vec3::Zero()));
    d[3] = vec(Vec3(0, 0, -1.5));
    doc["bodies"][0]["initial_displacement"] = d;
    doc["solver"]["h_min"] = 1e-3;
    const fs::path out = scratch("fail");
    RunOptions opts;
    opts.out_dir = out;
    const auto r = run_scenario(parse_scenario(doc), opts);
    CHECK(r.exit_code == kExitSolver);
    CHECK(r.steps_completed == 0);
    CHECK(fs::exists(out / "failure.txt"));
    CHECK(fs::exists(out / "final_state.csv"));

    const fs::path blocker = scratch("blocker");
    std::ofstream(blocker) << "x";
    opts.out_dir = blocker / "sub";
    CHECK(run_scenario(parse_scenario(minimal_doc()), opts).exit_code == kExitOutput);
    fs::remove(blocker);
  }

  TEST_CASE("numbers are written as shortest round-trip decimals") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(-2.5e-300) == "-2.5e-300");
    std::mt19937_64 rng(5);
    for (int k = 0; k < 1000; ++k) {
      const double x = oracle::uniform(rng) * std::pow(10.0, oracle::uniform(rng, -30, 30));
      const auto str = format_number(x);
      double back = 0;
      std::from_chars(str.data(), str.data() + str.size(), back);
      CHECK(back == x);
    }
  }
}
