// Runs the command-line binary and checks reports and exit codes.

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(ROBHEDGE_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (const std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fx(const std::string& name) { return std::string(ROBHEDGE_FIXTURES) + "/" + name; }

nlohmann::json parse(const Run& r) { return nlohmann::json::parse(r.out); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("price") {
    const auto tri = cli("price " + fx("trinomial-call-cvar09.json"));
    CHECK(tri.code == 0);
    const auto doc = parse(tri);
    CHECK(doc["format"] == 1);
    CHECK(doc["psi"].get<double>() == doctest::Approx(7.407407).epsilon(1e-6));
    CHECK(doc["phi"].get<double>() == doctest::Approx(10.0));

    const auto cst = cli("price " + fx("constant-claim-c3.json"));
    CHECK(cst.code == 0);
    CHECK(parse(cst)["phi"].get<double>() == doctest::Approx(3.0));
    CHECK(parse(cst)["psi"].get<double>() == doctest::Approx(3.0));
  }

  TEST_CASE("exit codes") {
    const auto bad = cli("price " + fx("invalid-arity-mismatch.json"));
    CHECK(bad.code == 1);
    CHECK(parse(bad)["error"]["path"] == "measures[0].step");
    CHECK(cli("verify " + fx("binomial-cvar08-nonviable.json")).code == 2);
    CHECK(cli("price " + fx("binomial-cvar08-nonviable.json")).code == 2);
    CHECK(cli("verify " + fx("binomial-cvar08-uniform.json")).code == 0);
    CHECK(cli("price /nonexistent.json").code == 1);
    CHECK(cli("").code == 1);
    CHECK(cli("price --tol -1 " + fx("trinomial-call-cvar09.json")).code == 1);
    CHECK(cli("risk " + fx("trinomial-call-cvar09.json")).code == 1);
  }

  TEST_CASE("verify") {
    const auto tri = cli("verify " + fx("trinomial-call-cvar09.json"));
    CHECK(tri.code == 0);
    const auto doc = parse(tri);
    CHECK(std::abs(doc["gap"].get<double>()) <= 1e-6);
    CHECK(doc["all_pass"] == true);
    const auto sc = cli("verify " + fx("trinomial-call-strict.json"));
    CHECK(sc.code == 0);
    CHECK(std::abs(parse(sc)["gap"].get<double>()) <= 1e-7);
  }

  TEST_CASE("risk") {
    CHECK(parse(cli("risk " + fx("risk-uniform-cvar05.json")))["robust_oce"].get<double>() ==
          doctest::Approx(-1.5));
    CHECK(parse(cli("risk " + fx("risk-constant-entropic.json")))["robust_oce"].get<double>() ==
          doctest::Approx(-2.0));
    const auto two = parse(cli("risk " + fx("risk-two-measure.json")));
    for (const auto& o : two["oce"]) CHECK(two["robust_oce"].get<double>() >= o["value"].get<double>() - 1e-9);
  }

  TEST_CASE("flags") {
    const auto fl = parse(cli("price --floor-c 5 " + fx("trinomial-call-cvar09.json")));
    CHECK(fl["floor_c"] == 5.0);
    CHECK(fl.contains("psi_c"));
    const auto after = parse(cli("price " + fx("trinomial-call-cvar09.json") + " --floor-c 5"));
    CHECK(after.contains("psi_c"));
    const auto tol = parse(cli("dual --tol 1e-9 " + fx("explicit-two-step-power.json")));
    CHECK(tol["tolerances"]["solver"] == 1e-9);

    const auto out = std::filesystem::temp_directory_path() / "robhedge_cli_test.json";
    std::filesystem::remove(out);
    const auto r = cli("--output " + out.string() + " dual " + fx("trinomial-call-cvar09.json"));
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(nlohmann::json::parse(ss.str())["dual_value"].get<double>() == doctest::Approx(20.0 / 2.7));
    std::filesystem::remove(out);
  }

  TEST_CASE("batch mode") {
    const auto r = cli("--jobs 3 price " + fx("trinomial-call-cvar09.json") + " " +
                       fx("binomial-cvar08-nonviable.json") + " " + fx("constant-claim-c3.json"));
    CHECK(r.code == 2);
    const auto doc = parse(r);
    REQUIRE(doc["reports"].size() == 3);
    CHECK(doc["reports"][0]["exit_code"] == 0);
    CHECK(doc["reports"][1]["exit_code"] == 2);
    CHECK(doc["reports"][2]["report"]["phi"].get<double>() == doctest::Approx(3.0));
  }

  TEST_CASE("hidden oracle command") {
    const auto v = cli("oracle vertices " + fx("trinomial-call-cvar09.json"));
    CHECK(v.code == 0);
    CHECK(parse(v)["count"] == 2);
    CHECK(cli("oracle cvar " + fx("risk-uniform-cvar05.json")).code == 0);
    CHECK(cli("oracle nonsense " + fx("risk-uniform-cvar05.json")).code == 1);
    CHECK(cli("--help").out.find("oracle") == std::string::npos);
  }
}
