#include "robhedge/robhedge.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "robhedge/commands.hpp"
#include "robhedge/instance.hpp"

struct rh_instance {
  robhedge::Instance value;
};

struct rh_report {
  rh_status status;
  std::string json;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_path;

void clear_error() {
  last_error.clear();
  last_path.clear();
}

rh_status set_error(rh_status s, std::string msg, std::string path = {}) {
  last_error = std::move(msg);
  last_path = std::move(path);
  return s;
}

rh_status from_outcome(robhedge::Outcome o) { return static_cast<rh_status>(static_cast<int>(o)); }

// Maps exceptions thrown by the core onto status codes.
template <class F>
rh_status guarded(F&& f) {
  clear_error();
  try {
    return f();
  } catch (const robhedge::ValidationError& e) {
    return set_error(RH_ERR_VALIDATION, e.what(), e.path());
  } catch (const robhedge::ModelError& e) {
    return set_error(RH_ERR_VALIDATION, e.what());
  } catch (const robhedge::SolverError& e) {
    return set_error(RH_ERR_SOLVER, e.what());
  } catch (const robhedge::UnboundedError& e) {
    return set_error(RH_ERR_SOLVER, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(RH_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(RH_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(RH_ERR_INTERNAL, "unknown error");
  }
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* rh_version(void) { return "0.1.0"; }

const char* rh_status_name(rh_status status) {
  switch (status) {
    case RH_OK: return "ok";
    case RH_ERR_VALIDATION: return "validation_error";
    case RH_NONVIABLE: return "nonviable";
    case RH_ERR_SOLVER: return "solver_failure";
    case RH_ERR_ARGUMENT: return "invalid_argument";
    case RH_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* rh_last_error(void) { return last_error.c_str(); }
const char* rh_last_error_path(void) { return last_path.c_str(); }

rh_status rh_instance_parse(const char* json, size_t length, rh_instance** out) {
  if (!json || !out) return set_error(RH_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new rh_instance{robhedge::Instance::parse(std::string(json, length))};
    return RH_OK;
  });
}

rh_status rh_instance_load(const char* path, rh_instance** out) {
  if (!path || !out) return set_error(RH_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new rh_instance{robhedge::Instance::load(path)};
    return RH_OK;
  });
}

void rh_instance_free(rh_instance* instance) { delete instance; }

rh_status rh_instance_set_floor(rh_instance* instance, double c) {
  if (!instance) return set_error(RH_ERR_ARGUMENT, "null instance");
  return guarded([&] {
    instance->value.set_floor(c < 0.0 ? std::nullopt : std::optional<double>(c));
    return RH_OK;
  });
}

rh_status rh_instance_set_tolerance(rh_instance* instance, double tol) {
  if (!instance) return set_error(RH_ERR_ARGUMENT, "null instance");
  return guarded([&] {
    instance->value.set_solver_tolerance(tol);
    return RH_OK;
  });
}

rh_status rh_instance_serialize(const rh_instance* instance, char** out) {
  if (!instance || !out) return set_error(RH_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = duplicate(instance->value.serialize());
    return RH_OK;
  });
}

size_t rh_command_count(void) { return robhedge::command_names().size(); }

const char* rh_command_name(size_t index) {
  const auto& names = robhedge::command_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

rh_status rh_run(const rh_instance* instance, const char* command, rh_report** out) {
  if (!instance || !command || !out) return set_error(RH_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto rep = robhedge::run_command(instance->value, command);
    const rh_status s = from_outcome(rep.outcome);
    *out = new rh_report{s, std::move(rep.json)};
    if (s == RH_NONVIABLE) set_error(s, "no martingale measure with finite penalty");
    if (s == RH_ERR_SOLVER) set_error(s, "solver did not certify the result");
    return s;
  });
}

rh_status rh_report_status(const rh_report* report) { return report ? report->status : RH_ERR_ARGUMENT; }

const char* rh_report_json(const rh_report* report) { return report ? report->json.c_str() : nullptr; }

void rh_report_free(rh_report* report) { delete report; }

rh_status rh_error_json(const char* command, rh_status status, char** out) {
  if (!out) return set_error(RH_ERR_ARGUMENT, "null argument");
  const std::string msg = last_error;
  const std::string path = last_path;
  *out = nullptr;
  auto outcome = robhedge::Outcome::solver_failure;
  if (status >= RH_OK && status <= RH_ERR_SOLVER)
    outcome = static_cast<robhedge::Outcome>(status);
  else if (status == RH_ERR_ARGUMENT)
    outcome = robhedge::Outcome::validation;
  try {
    *out = duplicate(robhedge::error_report(command ? command : "", outcome, msg, path));
  } catch (...) {
    return set_error(RH_ERR_INTERNAL, "out of memory");
  }
  return RH_OK;
}

void rh_string_free(char* s) { std::free(s); }

}  // extern "C"
