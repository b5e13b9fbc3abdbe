#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace robhedge {

// Invalid model input: bad tree wiring, non-probability vectors, bad loss
// parameters. Thrown by constructors and validating factories.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A ModelError that knows which field of an instance document caused it.
class ValidationError : public ModelError {
 public:
  ValidationError(std::string path, const std::string& message)
      : ModelError(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Numerical routine failed to converge or hit its iteration cap.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The objective of a 1-D risk minimization is not bounded below.
class UnboundedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace robhedge
