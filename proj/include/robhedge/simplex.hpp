#pragma once

// Dense two-phase tableau simplex. Rows are equilibrated; pricing is Dantzig
// with a Harris ratio test, falling back to Bland's rule after a run of
// degenerate pivots. Sized for hedging programs at desk scale.

#include <utility>
#include <vector>

#include "robhedge/market.hpp"

namespace robhedge::lp {

enum class Sense { less_equal, equal, greater_equal };
enum class Status { optimal, infeasible, unbounded, iteration_limit };

const char* to_string(Status s) noexcept;

struct Term {
  int var;
  double coef;
};

struct Row {
  std::vector<Term> terms;
  Sense sense;
  double rhs;
};

// minimize cost . x  subject to rows and lower <= x <= upper.
class Problem {
 public:
  int add_variable(double lower = 0.0, double upper = kInfinity, double cost = 0.0);
  int add_free_variable(double cost = 0.0) { return add_variable(-kInfinity, kInfinity, cost); }
  void set_cost(int var, double cost) { cost_.at(var) = cost; }
  void set_bounds(int var, double lower, double upper);
  void add_row(std::vector<Term> terms, Sense sense, double rhs);

  int num_variables() const noexcept { return static_cast<int>(cost_.size()); }
  int num_rows() const noexcept { return static_cast<int>(rows_.size()); }
  const Vec& cost() const noexcept { return cost_; }
  const Vec& lower() const noexcept { return lower_; }
  const Vec& upper() const noexcept { return upper_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }

 private:
  Vec cost_;
  Vec lower_;
  Vec upper_;
  std::vector<Row> rows_;
};

struct Options {
  double pivot_tol = 1e-9;
  double cost_tol = 1e-10;
  double feasibility_tol = 1e-8;
  int max_pivots = 200000;
};

struct Solution {
  Status status = Status::infeasible;
  double objective = 0.0;
  Vec x;
  int pivots = 0;
};

Solution solve(const Problem& problem, const Options& options = {});

}  // namespace robhedge::lp
