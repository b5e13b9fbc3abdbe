#include "robhedge/simplex.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace robhedge::lp {

const char* to_string(Status s) noexcept {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

int Problem::add_variable(double lower, double upper, double cost) {
  if (lower > upper) throw ModelError("lp: variable lower bound exceeds upper bound");
  cost_.push_back(cost);
  lower_.push_back(lower);
  upper_.push_back(upper);
  return static_cast<int>(cost_.size()) - 1;
}

void Problem::set_bounds(int var, double lower, double upper) {
  if (lower > upper) throw ModelError("lp: variable lower bound exceeds upper bound");
  lower_.at(var) = lower;
  upper_.at(var) = upper;
}

void Problem::add_row(std::vector<Term> terms, Sense sense, double rhs) {
  for (const auto& t : terms)
    if (t.var < 0 || t.var >= num_variables()) throw ModelError("lp: row references an unknown variable");
  rows_.push_back({std::move(terms), sense, rhs});
}

namespace {

// Standard-form image of one original variable: x = offset + sum sign * y[col].
struct VarMap {
  double offset = 0.0;
  int col = -1;
  double sign = 1.0;
  int col_neg = -1;  // free variables: x = y+ - y-
};

class Tableau {
 public:
  Tableau(int rows, int cols) : m_(rows), n_(cols), data_(static_cast<std::size_t>(rows + 1) * (cols + 1), 0.0) {}

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * (n_ + 1) + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * (n_ + 1) + c]; }
  double& rhs(int r) { return at(r, n_); }
  double& obj(int c) { return at(m_, c); }
  int rows() const { return m_; }
  int cols() const { return n_; }

  void pivot(int pr, int pc) {
    const double inv = 1.0 / at(pr, pc);
    double* prow = &at(pr, 0);
    for (int c = 0; c <= n_; ++c) prow[c] *= inv;
    prow[pc] = 1.0;
    for (int r = 0; r <= m_; ++r) {
      if (r == pr) continue;
      double* row = &at(r, 0);
      const double f = row[pc];
      if (f == 0.0) continue;
      for (int c = 0; c <= n_; ++c) row[c] -= f * prow[c];
      row[pc] = 0.0;
    }
  }

 private:
  int m_;
  int n_;
  Vec data_;
};

struct Engine {
  Tableau& t;
  std::vector<int>& basis;
  const std::vector<bool>& allowed;
  const Options& opt;
  // Original rows [A | b] and the phase cost, for reinversion.
  const Eigen::MatrixXd& original;
  const Vec& cost;
  int pivots = 0;
  int since_reinversion = 0;
  // Pricing threshold, relative to the largest phase cost.
  double cost_tol = 0.0;

  void set_cost_scale() {
    double scale = 1.0;
    for (double c : cost) scale = std::max(scale, std::abs(c));
    cost_tol = opt.cost_tol * scale;
  }

  // Recomputes the tableau as B^-1 [A | b] from the original rows, discarding
  // accumulated rounding. Keeps the current tableau if B is ill-conditioned.
  void reinvert() {
    since_reinversion = 0;
    const int m = t.rows();
    const int n = t.cols();
    Eigen::MatrixXd b(m, m);
    for (int i = 0; i < m; ++i) b.col(i) = original.col(basis[i]);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    if (!(lu.rcond() > 1e-13)) return;
    const Eigen::MatrixXd fresh = lu.solve(original);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c <= n; ++c) t.at(r, c) = fresh(r, c);
    for (int c = 0; c <= n; ++c) {
      double v = c < n ? cost[c] : 0.0;
      for (int r = 0; r < m; ++r) v -= cost[basis[r]] * fresh(r, c);
      t.obj(c) = v;
    }
    for (int r = 0; r < m; ++r) {
      for (int i = 0; i < m; ++i) t.at(i, basis[r]) = i == r ? 1.0 : 0.0;
      t.obj(basis[r]) = 0.0;
      if (t.rhs(r) < 0.0) t.rhs(r) = 0.0;
    }
  }

  int entering(bool bland) {
    int enter = -1;
    double most = -cost_tol;
    for (int c = 0; c < t.cols(); ++c) {
      if (!allowed[c] || t.obj(c) >= most) continue;
      enter = c;
      if (bland) break;
      most = t.obj(c);
    }
    return enter;
  }

  int leaving(int enter, bool bland) {
    int leave = -1;
    if (bland) {
      double best = kInfinity;
      for (int r = 0; r < t.rows(); ++r) {
        const double a = t.at(r, enter);
        if (a > opt.pivot_tol) best = std::min(best, std::max(0.0, t.rhs(r)) / a);
      }
      if (!std::isfinite(best)) return -1;
      const double slack = 1e-12 * (1.0 + std::abs(best));
      for (int r = 0; r < t.rows(); ++r) {
        const double a = t.at(r, enter);
        if (a <= opt.pivot_tol || std::max(0.0, t.rhs(r)) / a > best + slack) continue;
        if (leave < 0 || basis[r] < basis[leave]) leave = r;
      }
      return leave;
    }
    // Harris: among rows within the relaxed ratio bound, the largest pivot.
    double bound = kInfinity;
    for (int r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, enter);
      if (a > opt.pivot_tol) bound = std::min(bound, (std::max(0.0, t.rhs(r)) + opt.feasibility_tol) / a);
    }
    if (!std::isfinite(bound)) return -1;
    double pivot = 0.0;
    for (int r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, enter);
      if (a > opt.pivot_tol && std::max(0.0, t.rhs(r)) / a <= bound && a > pivot) {
        pivot = a;
        leave = r;
      }
    }
    return leave;
  }

  // Returns optimal / unbounded / iteration_limit.
  Status run() {
    // Dantzig pricing; after a run of degenerate pivots switch to Bland's
    // rule, which cannot cycle. Verdicts are confirmed on a fresh tableau.
    constexpr int kBlandAfter = 50;
    constexpr int kReinvertEvery = 100;
    set_cost_scale();
    int degenerate = 0;
    while (true) {
      const bool bland = degenerate >= kBlandAfter;
      int enter = entering(bland);
      if (enter < 0 && since_reinversion > 0) {
        reinvert();
        enter = entering(bland);
      }
      if (enter < 0) return Status::optimal;
      int leave = leaving(enter, bland);
      if (leave < 0 && since_reinversion > 0) {
        reinvert();
        enter = entering(bland);
        if (enter < 0) return Status::optimal;
        leave = leaving(enter, bland);
      }
      if (leave < 0) return Status::unbounded;

      // Pivots that leave the objective unchanged at working precision count
      // as degenerate: long steps along rounding-level reduced costs can
      // cycle as well.
      const double step = std::max(0.0, t.rhs(leave)) / t.at(leave, enter);
      const double gain = -step * t.obj(enter);
      const double level = std::abs(t.obj(t.cols()));
      degenerate = step <= 1e-12 || gain <= 1e-13 * std::max(1.0, level) ? degenerate + 1 : 0;
      t.pivot(leave, enter);
      basis[leave] = enter;
      for (int r = 0; r < t.rows(); ++r)
        if (t.rhs(r) < 0.0) t.rhs(r) = 0.0;
      if (++pivots > opt.max_pivots) return Status::iteration_limit;
      if (++since_reinversion >= kReinvertEvery) reinvert();
    }
  }
};

}  // namespace

Solution solve(const Problem& problem, const Options& options) {
  const int nvar = problem.num_variables();
  std::vector<VarMap> vmap(nvar);
  int ncols = 0;
  struct BoundRow {
    int col;
    double ub;
  };
  std::vector<BoundRow> bound_rows;
  for (int j = 0; j < nvar; ++j) {
    const double lo = problem.lower()[j];
    const double hi = problem.upper()[j];
    auto& vm = vmap[j];
    if (std::isfinite(lo)) {
      vm.offset = lo;
      vm.col = ncols++;
      if (std::isfinite(hi)) bound_rows.push_back({vm.col, hi - lo});
    } else if (std::isfinite(hi)) {
      vm.offset = hi;
      vm.sign = -1.0;
      vm.col = ncols++;
    } else {
      vm.col = ncols++;
      vm.col_neg = ncols++;
    }
  }

  struct StdRow {
    Vec coef;
    Sense sense;
    double rhs;
  };
  std::vector<StdRow> rows;
  rows.reserve(problem.rows().size() + bound_rows.size());
  for (const auto& row : problem.rows()) {
    StdRow s{Vec(ncols, 0.0), row.sense, row.rhs};
    for (const auto& term : row.terms) {
      const auto& vm = vmap[term.var];
      s.rhs -= term.coef * vm.offset;
      s.coef[vm.col] += vm.sign * term.coef;
      if (vm.col_neg >= 0) s.coef[vm.col_neg] -= term.coef;
    }
    rows.push_back(std::move(s));
  }
  for (const auto& br : bound_rows) {
    StdRow s{Vec(ncols, 0.0), Sense::less_equal, br.ub};
    s.coef[br.col] = 1.0;
    rows.push_back(std::move(s));
  }
  for (auto& r : rows) {
    double scale = 0.0;
    for (double a : r.coef) scale = std::max(scale, std::abs(a));
    if (scale > 0.0) {
      for (double& a : r.coef) a /= scale;
      r.rhs /= scale;
    }
    if (r.rhs < 0.0) {
      for (double& a : r.coef) a = -a;
      r.rhs = -r.rhs;
      if (r.sense == Sense::less_equal) r.sense = Sense::greater_equal;
      else if (r.sense == Sense::greater_equal) r.sense = Sense::less_equal;
    }
  }

  const int m = static_cast<int>(rows.size());
  int nslack = 0;
  int nart = 0;
  for (const auto& r : rows) {
    if (r.sense != Sense::equal) ++nslack;
    if (r.sense != Sense::less_equal) ++nart;
  }
  const int total = ncols + nslack + nart;
  const int art_begin = ncols + nslack;
  Tableau t(m, total);
  std::vector<int> basis(m, -1);
  double max_rhs = 0.0;
  {
    int s = ncols;
    int a = art_begin;
    for (int i = 0; i < m; ++i) {
      const auto& r = rows[i];
      for (int c = 0; c < ncols; ++c) t.at(i, c) = r.coef[c];
      t.rhs(i) = r.rhs;
      max_rhs = std::max(max_rhs, r.rhs);
      if (r.sense == Sense::less_equal) {
        t.at(i, s) = 1.0;
        basis[i] = s++;
      } else if (r.sense == Sense::greater_equal) {
        t.at(i, s++) = -1.0;
        t.at(i, a) = 1.0;
        basis[i] = a++;
      } else {
        t.at(i, a) = 1.0;
        basis[i] = a++;
      }
    }
  }

  Eigen::MatrixXd original(m, total + 1);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c <= total; ++c) original(i, c) = t.at(i, c);

  Solution sol;
  std::vector<bool> allowed(total, true);

  // Phase 1: minimize the sum of artificials.
  if (nart > 0) {
    Vec phase1(total, 0.0);
    for (int c = art_begin; c < total; ++c) phase1[c] = 1.0;
    for (int i = 0; i < m; ++i) {
      if (basis[i] < art_begin) continue;
      for (int c = 0; c <= total; ++c)
        if (c < art_begin || c == total) t.obj(c) -= t.at(i, c);
    }
    Engine e{t, basis, allowed, options, original, phase1};
    const Status st = e.run();
    sol.pivots += e.pivots;
    if (st == Status::iteration_limit) {
      sol.status = st;
      return sol;
    }
    // Phase 1 is bounded below by zero.
    if (st == Status::unbounded) throw SolverError("lp: phase 1 lost numerical consistency");
    if (-t.obj(total) > options.feasibility_tol * (1.0 + max_rhs)) {
      sol.status = Status::infeasible;
      return sol;
    }
    // Drive artificials out of the basis. Those that cannot leave sit on
    // redundant rows at level zero and stay basic.
    for (int i = 0; i < m; ++i) {
      if (basis[i] < art_begin) continue;
      int col = -1;
      double best = options.pivot_tol;
      for (int c = 0; c < art_begin; ++c) {
        if (std::abs(t.at(i, c)) > best) {
          best = std::abs(t.at(i, c));
          col = c;
        }
      }
      if (col >= 0) {
        t.pivot(i, col);
        basis[i] = col;
      }
    }
    for (int c = art_begin; c < total; ++c) allowed[c] = false;
  }

  // Phase 2.
  Vec cost(total, 0.0);
  for (int j = 0; j < nvar; ++j) {
    const auto& vm = vmap[j];
    cost[vm.col] += vm.sign * problem.cost()[j];
    if (vm.col_neg >= 0) cost[vm.col_neg] -= problem.cost()[j];
  }
  for (int c = 0; c <= total; ++c) t.obj(c) = c < total ? cost[c] : 0.0;
  for (int i = 0; i < t.rows(); ++i) {
    const double cb = cost[basis[i]];
    if (cb == 0.0) continue;
    for (int c = 0; c <= total; ++c) t.obj(c) -= cb * t.at(i, c);
  }
  Engine e{t, basis, allowed, options, original, cost};
  e.since_reinversion = 1;
  const Status st = e.run();
  sol.pivots += e.pivots;
  sol.status = st;
  if (st != Status::optimal) return sol;

  Vec y(total, 0.0);
  for (int i = 0; i < t.rows(); ++i) y[basis[i]] = std::max(0.0, t.rhs(i));
  sol.x.resize(nvar);
  sol.objective = 0.0;
  for (int j = 0; j < nvar; ++j) {
    const auto& vm = vmap[j];
    double x = vm.offset + vm.sign * y[vm.col];
    if (vm.col_neg >= 0) x -= y[vm.col_neg];
    sol.x[j] = x;
    sol.objective += problem.cost()[j] * x;
  }
  return sol;
}

}  // namespace robhedge::lp
