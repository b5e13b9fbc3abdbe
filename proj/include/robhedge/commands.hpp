#pragma once

// Batch commands over a parsed instance. Each produces a JSON report (format
// 1, lower_snake_case fields) and an outcome that maps onto process exit codes.

#include <string>
#include <string_view>
#include <vector>

#include "robhedge/instance.hpp"

namespace robhedge {

enum class Outcome { success = 0, validation = 1, nonviable = 2, solver_failure = 3 };

const char* to_string(Outcome o) noexcept;

struct CommandReport {
  Outcome outcome = Outcome::success;
  std::string json;  // pretty-printed, trailing newline
};

// price, dual, verify, risk, and the oracle subcommands oracle.brute_force,
// oracle.vertices, oracle.cvar, oracle.naive_oce.
const std::vector<std::string>& command_names();

// Throws ValidationError for unknown commands or missing inputs (no claim,
// no position), SolverError when a solver fails outright.
CommandReport run_command(const Instance& instance, std::string_view command);

// JSON error report used when a run fails before producing a report.
std::string error_report(std::string_view command, Outcome outcome, std::string_view message,
                         std::string_view path = {});

}  // namespace robhedge
