#pragma once

namespace robhedge {

enum class SolveStatus {
  optimal,
  // No martingale measure with finite penalty: prices are -infinity.
  nonviable,
  iteration_limit,
};

inline const char* to_string(SolveStatus s) noexcept {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::nonviable: return "nonviable";
    case SolveStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

}  // namespace robhedge
