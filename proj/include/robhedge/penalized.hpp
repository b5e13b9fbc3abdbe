#pragma once

// Concave programs of the form
//
//   maximize   sum_i q_i v_i - sum_i P_i l*(q_i / P_i),   P = sum_k w_k P^k
//   over       q >= 0 with A q = b,  w in the unit simplex.
//
// The perspective P l*(q/P) is jointly convex in (q, P), so the program is
// concave in (q, w). Polyhedral losses become one LP; smooth losses run a
// log-barrier Newton method on the null space of the equality constraints.

#include <vector>

#include "robhedge/loss.hpp"
#include "robhedge/market.hpp"

namespace robhedge {

struct EqualitySystem {
  std::vector<Vec> rows;
  Vec rhs;
};

enum class ProgramStatus { optimal, infeasible, iteration_limit };

struct PenalizedOptions {
  double tolerance = 1e-10;  // barrier duality gap, relative to max |payoff|
  int max_iterations = 5000;  // Newton steps
};

struct PenalizedResult {
  ProgramStatus status = ProgramStatus::infeasible;
  double value = -kInfinity;
  Vec q;
  Vec mixture;
  double penalty = kInfinity;
  double gap = 0.0;
  int iterations = 0;
};

// refs[k][i] is the probability of coordinate i under reference k. Coordinates
// past the length of the reference vectors are unpenalized: they are only
// nonnegative and enter the objective linearly. Their linear cost must keep
// the program bounded.
PenalizedResult maximize_penalized(const EqualitySystem& polytope, const Vec& payoff, const std::vector<Vec>& refs,
                                   const LossSpec& spec, const PenalizedOptions& options = {});

// Exact value of the penalty term at (q, w).
double mixture_penalty(const Vec& q, const std::vector<Vec>& refs, const Vec& weights, const LossSpec& spec);

}  // namespace robhedge
