#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "robhedge/commands.hpp"
#include "robhedge/instance.hpp"

using namespace robhedge;
namespace fs = std::filesystem;

namespace {

std::string fixture_path(const std::string& name) { return std::string(ROBHEDGE_FIXTURES) + "/" + name; }

std::string read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_path(const std::string& text) {
  try {
    Instance::parse(text);
  } catch (const ValidationError& e) {
    return e.path();
  }
  return "<no error>";
}

const char* kMinimal = R"({
  "format": 1,
  "tree": {"generator": {"initial_price": [100], "factors": [[1.2], [0.8]], "steps": 1}},
  "measures": [{"step": [0.5, 0.5]}],
  "claim": {"kind": "call", "strike": 100},
  "loss": {"kind": "cvar", "alpha": 0.5}
})";

std::string patched(const std::string& pointer, const nlohmann::json& value) {
  auto doc = nlohmann::json::parse(kMinimal);
  doc[nlohmann::json::json_pointer(pointer)] = value;
  return doc.dump();
}

nlohmann::json run(const std::string& fixture, const std::string& command, CommandReport* out = nullptr) {
  const auto rep = run_command(Instance::load(fixture_path(fixture)), command);
  if (out) *out = rep;
  return nlohmann::json::parse(rep.json);
}

}  // namespace

TEST_SUITE("instance") {
  TEST_CASE("canonical fixtures round-trip byte for byte") {
    int n = 0;
    for (const auto& entry : fs::directory_iterator(ROBHEDGE_FIXTURES)) {
      const auto name = entry.path().filename().string();
      if (entry.path().extension() != ".json" || name.rfind("invalid-", 0) == 0) continue;
      const std::string text = read(entry.path().string());
      CHECK_MESSAGE(Instance::parse(text).serialize() == text, name);
      ++n;
    }
    CHECK(n >= 8);
  }

  TEST_CASE("parse builds the model") {
    const auto inst = Instance::load(fixture_path("explicit-two-step-power.json"));
    CHECK(inst.tree().size() == 7);
    CHECK(inst.measures().size() == 2);
    CHECK(inst.claim().payoff.size() == 4);
    CHECK(inst.loss().kind() == LossKind::power);
    CHECK(inst.tolerances().solver == 1e-10);
    const auto tri = Instance::load(fixture_path("trinomial-call-cvar09.json"));
    CHECK(tri.claim().payoff == Vec{20.0, 0.0, 0.0});
    CHECK_FALSE(tri.floor().has_value());
    CHECK(Instance::load(fixture_path("trinomial-call-cvar09-floor.json")).floor() == 5.0);
  }

  TEST_CASE("non-canonical input normalizes") {
    const auto inst = Instance::parse(kMinimal);
    const auto once = inst.serialize();
    CHECK(Instance::parse(once).serialize() == once);
    CHECK(once.find("\"asset\": 0") != std::string::npos);
  }

  TEST_CASE("validation errors carry field paths") {
    CHECK(error_path("{") == "");
    CHECK(error_path(patched("/format", 2)) == "format");
    CHECK(error_path(patched("/measures/0/step", {0.5, 0.3, 0.2})) == "measures[0].step");
    CHECK(error_path(patched("/measures/0/step", {0.7, 0.7})) == "measures[0].step");
    CHECK(error_path(patched("/measures/0/step", {1.5, -0.5})) == "measures[0].step[1]");
    CHECK(error_path(patched("/measures", nlohmann::json::array())) == "measures");
    CHECK(error_path(patched("/claim/kind", "digital")) == "claim.kind");
    CHECK(error_path(patched("/claim/asset", 3)) == "claim.asset");
    CHECK(error_path(patched("/loss/alpha", 1.5)) == "loss");
    CHECK(error_path(patched("/loss/kind", "quadratic")) == "loss.kind");
    CHECK(error_path(patched("/floor_c", -1)) == "floor_c");
    CHECK(error_path(patched("/position", {1.0})) == "position");
    CHECK(error_path(patched("/candidate_q", {0.7, 0.7})) == "candidate_q");
    CHECK(error_path(patched("/tree/generator/factors/1", {0.8, 0.9})) == "tree.generator.factors[1]");
    CHECK(error_path(patched("/tree/generator/steps", 0)) == "tree.generator.steps");
    CHECK(error_path(patched("/tree/generator/factors/1/0", -0.8)) == "tree.generator");
    CHECK(error_path(patched("/tolerances", {{"solver", 0}})) == "tolerances.solver");
    CHECK(error_path(patched("/extra", 1)) == "extra");
    CHECK(error_path(patched("/tree/nodes", nlohmann::json::array())) == "tree");
    CHECK(error_path(read(fixture_path("invalid-arity-mismatch.json"))) == "measures[0].step");
  }

  TEST_CASE("explicit trees are validated") {
    auto doc = nlohmann::json::parse(kMinimal);
    doc["tree"] = {{"nodes",
                    {{{"time", 0}, {"price", {100}}, {"children", {1, 2}}},
                     {{"time", 0}, {"price", {120}}, {"children", nlohmann::json::array()}},
                     {{"time", 1}, {"price", {80}}, {"children", nlohmann::json::array()}}}}};
    CHECK(error_path(doc.dump()) == "tree.nodes");
    doc["tree"]["nodes"][0]["children"] = {1, 7};
    CHECK(error_path(doc.dump()) == "tree.nodes[0].children[1]");
  }

  TEST_CASE("overrides") {
    auto inst = Instance::parse(kMinimal);
    inst.set_floor(10.0);
    CHECK(inst.floor() == 10.0);
    inst.set_floor(std::nullopt);
    CHECK_FALSE(inst.floor().has_value());
    CHECK_THROWS_AS(inst.set_floor(-1.0), ValidationError);
    inst.set_solver_tolerance(1e-8);
    CHECK(inst.tolerances().solver == 1e-8);
    CHECK(Instance::parse(inst.serialize()).tolerances().solver == 1e-8);
  }

  TEST_CASE("position defaults to an explicit payoff claim") {
    auto doc = nlohmann::json::parse(kMinimal);
    CHECK_THROWS_AS(Instance::parse(doc.dump()).position(), ValidationError);
    doc["claim"] = {{"kind", "payoff"}, {"payoff", {1.0, 2.0}}};
    CHECK(Instance::parse(doc.dump()).position() == Vec{1.0, 2.0});
    doc.erase("claim");
    CHECK_THROWS_AS(Instance::parse(doc.dump()).claim(), ValidationError);
  }
}

TEST_SUITE("commands") {
  TEST_CASE("price examples") {
    CommandReport rep;
    const auto tri = run("trinomial-call-cvar09.json", "price", &rep);
    CHECK(rep.outcome == Outcome::success);
    CHECK(tri["psi"].get<double>() == doctest::Approx(20.0 / 2.7).epsilon(1e-6));
    CHECK(tri["phi"].get<double>() == doctest::Approx(10.0));
    CHECK(tri["status"] == "optimal");
    CHECK(tri.contains("strategy"));
    CHECK(tri.contains("shortfall"));
    CHECK(tri.contains("tolerances"));
    CHECK(tri.contains("iterations"));
    CHECK_FALSE(tri.contains("psi_c"));

    const auto cst = run("constant-claim-c3.json", "price");
    CHECK(cst["phi"].get<double>() == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(cst["psi"].get<double>() == doctest::Approx(3.0).epsilon(1e-12));

    const auto fl = run("trinomial-call-cvar09-floor.json", "price");
    CHECK(fl.contains("psi_c"));
    CHECK(fl["psi_c"].get<double>() >= fl["psi"].get<double>() - 1e-8);

    run("binomial-cvar08-nonviable.json", "price", &rep);
    CHECK(rep.outcome == Outcome::nonviable);
    CHECK_THROWS_AS(run("risk-uniform-cvar05.json", "price"), ValidationError);
  }

  TEST_CASE("verify examples") {
    CommandReport rep;
    const auto tri = run("trinomial-call-cvar09.json", "verify", &rep);
    CHECK(rep.outcome == Outcome::success);
    CHECK(std::abs(tri["gap"].get<double>()) <= 1e-6);
    CHECK(tri["all_pass"] == true);
    CHECK(tri["certificate_q"].size() == 3);
    CHECK(tri["chosen_p"].size() == 3);
    for (const auto& inv : tri["invariants"]) CHECK_MESSAGE(inv["passed"] == true, inv["name"]);

    const auto sc = run("trinomial-call-strict.json", "verify", &rep);
    CHECK(rep.outcome == Outcome::success);
    CHECK(std::abs(sc["gap"].get<double>()) <= 1e-7);

    const auto nv = run("binomial-cvar08-nonviable.json", "verify", &rep);
    CHECK(rep.outcome == Outcome::nonviable);
    CHECK(nv["status"] == "nonviable");

    run("explicit-two-step-power.json", "verify", &rep);
    CHECK(rep.outcome == Outcome::success);
  }

  TEST_CASE("dual examples") {
    CommandReport rep;
    const auto tri = run("trinomial-call-cvar09.json", "dual", &rep);
    CHECK(tri["dual_value"].get<double>() == doctest::Approx(20.0 / 2.7).epsilon(1e-6));
    CHECK(tri["superhedge_dual_value"].get<double>() == doctest::Approx(10.0));
    run("binomial-cvar08-nonviable.json", "dual", &rep);
    CHECK(rep.outcome == Outcome::nonviable);
    run("binomial-cvar08-uniform.json", "dual", &rep);
    CHECK(rep.outcome == Outcome::success);
  }

  TEST_CASE("risk examples") {
    const auto u = run("risk-uniform-cvar05.json", "risk");
    CHECK(u["robust_oce"].get<double>() == doctest::Approx(-1.5).epsilon(1e-9));
    CHECK(u["dual_oce"]["value"].get<double>() == doctest::Approx(-1.5).epsilon(1e-6));
    const auto c = run("risk-constant-entropic.json", "risk");
    CHECK(c["robust_oce"].get<double>() == doctest::Approx(-2.0).epsilon(1e-9));
    const auto two = run("risk-two-measure.json", "risk");
    const double rob = two["robust_oce"].get<double>();
    REQUIRE(two["oce"].size() == 2);
    for (const auto& o : two["oce"]) CHECK(rob >= o["value"].get<double>() - 1e-9);
    CHECK(two["candidate_penalty"]["value"].get<double>() == doctest::Approx(0.0));
    CHECK_THROWS_AS(run("trinomial-call-cvar09.json", "risk"), ValidationError);
  }

  TEST_CASE("oracle commands") {
    const auto v = run("trinomial-call-cvar09.json", "oracle.vertices");
    CHECK(v["count"] == 2);
    CHECK(v["max_expectation"].get<double>() == doctest::Approx(10.0));
    const auto b = run("trinomial-call-cvar09.json", "oracle.brute_force");
    CHECK(b["price"].get<double>() >= 20.0 / 2.7 - 1e-9);
    CHECK(b["price"].get<double>() <= 20.0 / 2.7 + 2e-4);
    CHECK(run("risk-uniform-cvar05.json", "oracle.cvar")["max_cvar"].get<double>() == doctest::Approx(-1.5));
    CHECK(run("risk-uniform-cvar05.json", "oracle.naive_oce")["robust_oce"].get<double>() ==
          doctest::Approx(-1.5).epsilon(1e-7));
    CHECK_THROWS_AS(run("risk-constant-entropic.json", "oracle.cvar"), ValidationError);
    CHECK_THROWS_AS(run("risk-uniform-cvar05.json", "nope"), ValidationError);
  }
}
