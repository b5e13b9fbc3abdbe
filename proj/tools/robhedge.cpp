// robhedge command-line front end. Talks to the solvers only through the C API.

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "robhedge/robhedge.h"

namespace {

struct Options {
  std::optional<double> tol;
  std::optional<double> floor_c;
  int jobs = 1;
  std::string output;
};

struct Result {
  int exit_code = 0;
  std::string json;
};

int exit_code(rh_status s) {
  switch (s) {
    case RH_OK: return 0;
    case RH_ERR_VALIDATION:
    case RH_ERR_ARGUMENT: return 1;
    case RH_NONVIABLE: return 2;
    default: return 3;
  }
}

std::string error_json(const std::string& command, rh_status s) {
  char* text = nullptr;
  std::string out;
  if (rh_error_json(command.c_str(), s, &text) == RH_OK) out = text;
  rh_string_free(text);
  return out;
}

Result run_file(const std::string& command, const std::string& file, const Options& opt) {
  rh_instance* inst = nullptr;
  rh_status s = rh_instance_load(file.c_str(), &inst);
  if (s == RH_OK && opt.floor_c) s = rh_instance_set_floor(inst, *opt.floor_c);
  if (s == RH_OK && opt.tol) s = rh_instance_set_tolerance(inst, *opt.tol);
  Result r;
  if (s != RH_OK) {
    std::cerr << file << ": " << rh_last_error() << "\n";
    r = {exit_code(s), error_json(command, s)};
    rh_instance_free(inst);
    return r;
  }
  rh_report* rep = nullptr;
  s = rh_run(inst, command.c_str(), &rep);
  if (rep) {
    r = {exit_code(s), rh_report_json(rep)};
  } else {
    std::cerr << file << ": " << rh_last_error() << "\n";
    r = {exit_code(s), error_json(command, s)};
  }
  if (s != RH_OK && rep) std::cerr << file << ": " << rh_last_error() << "\n";
  rh_report_free(rep);
  rh_instance_free(inst);
  return r;
}

int run_batch(const std::string& command, const std::vector<std::string>& files, const Options& opt) {
  std::vector<Result> results(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) results[i] = run_file(command, files[i], opt);
  };
  const auto n = static_cast<std::size_t>(std::max(1, opt.jobs));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(n, files.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string text;
  int code = 0;
  if (files.size() == 1) {
    text = results.front().json;
    code = results.front().exit_code;
  } else {
    auto batch = nlohmann::ordered_json::object();
    batch["format"] = 1;
    batch["command"] = command;
    auto reports = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < files.size(); ++i) {
      auto entry = nlohmann::ordered_json::object();
      entry["file"] = files[i];
      entry["exit_code"] = results[i].exit_code;
      entry["report"] = nlohmann::ordered_json::parse(results[i].json);
      reports.push_back(std::move(entry));
      code = std::max(code, results[i].exit_code);
    }
    batch["reports"] = std::move(reports);
    text = batch.dump(2) + "\n";
  }

  if (opt.output.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(opt.output, std::ios::binary);
    out << text;
    if (!out) {
      std::cerr << "cannot write " << opt.output << "\n";
      return 1;
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Superhedging and risk-relaxed hedging prices on finite scenario trees"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rh_version()));

  Options opt;
  double tol = 0.0;
  double floor_c = 0.0;
  auto* tol_opt = app.add_option("--tol", tol, "Solver tolerance (barrier duality gap)")->check(CLI::PositiveNumber);
  auto* floor_opt =
      app.add_option("--floor-c", floor_c, "Admissibility floor c: gains >= -c at every node")->check(CLI::NonNegativeNumber);
  app.add_option("--jobs", opt.jobs, "Instance files solved concurrently")->check(CLI::PositiveNumber);
  app.add_option("--output", opt.output, "Write the report here instead of stdout");

  std::vector<std::string> files;
  std::string command;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"price", "Superhedging price, acceptance price and hedge"},
      {"dual", "Penalized martingale-measure dual"},
      {"verify", "Primal, dual, duality gap and invariant checks"},
      {"risk", "OCE per measure, robust OCE and its dual for a leaf position"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->add_option("files", files, "Instance JSON files")->required()->check(CLI::ExistingFile);
    sub->callback([&command, n = name] { command = n; });
  }
  std::string oracle_cmd;
  auto* oracle = app.add_subcommand("oracle", "Brute-force reference computations");
  oracle->group("");
  oracle->fallthrough();
  oracle->add_option("subcmd", oracle_cmd, "brute_force, vertices, cvar or naive_oce")
      ->required()
      ->check(CLI::IsMember({"brute_force", "vertices", "cvar", "naive_oce"}));
  oracle->add_option("files", files, "Instance JSON files")->required()->check(CLI::ExistingFile);
  oracle->callback([&] { command = "oracle." + oracle_cmd; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  if (*tol_opt) opt.tol = tol;
  if (*floor_opt) opt.floor_c = floor_c;
  return run_batch(command, files, opt);
}
