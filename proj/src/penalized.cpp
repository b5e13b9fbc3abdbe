#include "robhedge/penalized.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "robhedge/simplex.hpp"

namespace robhedge {

namespace {

constexpr double kDomainSlack = 1e-9;
// Bound on unpenalized coordinates in the mass-seeking starting LPs.
constexpr double kLinearCap = 10.0;
constexpr double kLinearCapLimit = 1e8;

// Q mass on the boundary of a polyhedral domain up to rounding is snapped
// onto it, so LP optimizers with q = s_max * P evaluate finitely.
double perspective(const LossSpec& spec, double q, double p) {
  q = std::max(0.0, q);
  if (spec.is_polyhedral() && p > 0.0) {
    const auto s = spec.kink_slopes();
    const double y = q / p;
    if (y > s.back() && q <= s.back() * p * (1.0 + kDomainSlack) + kDomainSlack) return p * eval_l_star(spec, s.back());
    if (y < s.front() && q >= s.front() * p * (1.0 - kDomainSlack) - kDomainSlack) return p * eval_l_star(spec, s.front());
  }
  if (p > 0.0) return p * eval_l_star(spec, q / p);
  return q > kDomainSlack ? kInfinity : 0.0;
}

Vec mix(const std::vector<Vec>& refs, const Vec& w) {
  Vec p(refs.front().size(), 0.0);
  for (std::size_t k = 0; k < refs.size(); ++k)
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += w[k] * refs[k][i];
  return p;
}

void add_polytope_rows(lp::Problem& prob, const EqualitySystem& poly, int q0) {
  for (std::size_t r = 0; r < poly.rows.size(); ++r) {
    std::vector<lp::Term> terms;
    for (std::size_t j = 0; j < poly.rows[r].size(); ++j)
      if (poly.rows[r][j] != 0.0) terms.push_back({q0 + static_cast<int>(j), poly.rows[r][j]});
    prob.add_row(std::move(terms), lp::Sense::equal, poly.rhs[r]);
  }
}

PenalizedResult solve_polyhedral(const EqualitySystem& poly, const Vec& payoff, const std::vector<Vec>& refs,
                                 const LossSpec& spec) {
  const int n = static_cast<int>(refs.front().size());
  const int nk = static_cast<int>(refs.size());
  lp::Problem prob;
  const int q0 = 0;
  for (std::size_t i = 0; i < payoff.size(); ++i) prob.add_variable(0.0, kInfinity, -payoff[i]);
  const int w0 = prob.num_variables();
  for (int k = 0; k < nk; ++k) prob.add_variable(0.0, kInfinity, 0.0);
  const int e0 = prob.num_variables();
  for (int i = 0; i < n; ++i) prob.add_free_variable(1.0);

  add_polytope_rows(prob, poly, q0);
  {
    std::vector<lp::Term> terms;
    for (int k = 0; k < nk; ++k) terms.push_back({w0 + k, 1.0});
    prob.add_row(std::move(terms), lp::Sense::equal, 1.0);
  }
  const auto kinks = spec.kinks();
  const auto slopes = spec.kink_slopes();
  for (int i = 0; i < n; ++i) {
    // e_i >= b q_i - l(b) P_i(w) for every kink b: the perspective of l*.
    if (kinks.empty()) {
      prob.add_row({{e0 + i, 1.0}}, lp::Sense::greater_equal, 0.0);
    }
    for (double b : kinks) {
      std::vector<lp::Term> terms{{e0 + i, 1.0}, {q0 + i, -b}};
      const double lb = eval_l(spec, b);
      for (int k = 0; k < nk; ++k)
        if (refs[k][i] != 0.0 && lb != 0.0) terms.push_back({w0 + k, lb * refs[k][i]});
      prob.add_row(std::move(terms), lp::Sense::greater_equal, 0.0);
    }
    // Domain of l*: s_min P_i(w) <= q_i <= s_max P_i(w).
    std::vector<lp::Term> upper{{q0 + i, 1.0}};
    for (int k = 0; k < nk; ++k)
      if (refs[k][i] != 0.0) upper.push_back({w0 + k, -slopes.back() * refs[k][i]});
    prob.add_row(std::move(upper), lp::Sense::less_equal, 0.0);
    if (slopes.front() > 0.0) {
      std::vector<lp::Term> lower{{q0 + i, 1.0}};
      for (int k = 0; k < nk; ++k)
        if (refs[k][i] != 0.0) lower.push_back({w0 + k, -slopes.front() * refs[k][i]});
      prob.add_row(std::move(lower), lp::Sense::greater_equal, 0.0);
    }
  }
  const auto sol = lp::solve(prob);
  PenalizedResult res;
  res.iterations = sol.pivots;
  if (sol.status == lp::Status::infeasible) return res;
  if (sol.status != lp::Status::optimal) {
    res.status = ProgramStatus::iteration_limit;
    return res;
  }
  res.status = ProgramStatus::optimal;
  res.q.assign(sol.x.begin() + q0, sol.x.begin() + q0 + static_cast<std::ptrdiff_t>(payoff.size()));
  res.mixture.assign(sol.x.begin() + w0, sol.x.begin() + w0 + nk);
  res.penalty = 0.0;
  for (int i = 0; i < n; ++i) res.penalty += sol.x[e0 + i];
  res.value = -sol.objective;
  return res;
}

// ---------------------------------------------------------------------------
// Log-barrier Newton method for smooth l*.

double l_star_second(const LossSpec& spec, double y) {
  if (spec.kind() == LossKind::power) return (spec.q() - 1.0) * std::pow(y, spec.q() - 2.0);
  return 1.0 / y;
}

// Null-space basis of m as columns.
Eigen::MatrixXd null_space(const Eigen::MatrixXd& m) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-10);
  if (lu.rank() == m.cols()) return Eigen::MatrixXd(m.cols(), 0);
  return lu.kernel();
}

class BarrierProgram {
 public:
  BarrierProgram(const EqualitySystem& poly, const Vec& payoff, const std::vector<Vec>& refs, const LossSpec& spec)
      : poly_(poly), payoff_(payoff), refs_(refs), spec_(spec) {
    charged_.assign(payoff_.size(), false);
    penalized_ = refs_.front().size();
    for (const auto& r : refs_)
      for (std::size_t i = 0; i < r.size(); ++i)
        if (r[i] > 0.0) charged_[i] = true;
    for (std::size_t i = penalized_; i < payoff_.size(); ++i) charged_[i] = true;
    for (double v : payoff_) scale_ = std::max(scale_, std::abs(v));
  }

  PenalizedResult run(const PenalizedOptions& opt) {
    PenalizedResult res;
    Vec q_start;
    if (!interior_point(q_start)) return res;
    const std::size_t nf = free_.size();
    const std::size_t nk = refs_.size();
    const std::size_t dim = nf + nk;

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(poly_.rows.size()) + 1, dim);
    for (std::size_t r = 0; r < poly_.rows.size(); ++r)
      for (std::size_t j = 0; j < nf; ++j) m(r, j) = poly_.rows[r][free_[j]];
    m.bottomRightCorner(1, nk).setOnes();
    basis_ = null_space(m);

    Vec x(dim);
    for (std::size_t j = 0; j < nf; ++j) x[j] = q_start[free_[j]];
    for (std::size_t k = 0; k < nk; ++k) x[nf + k] = 1.0 / static_cast<double>(nk);
    // Barrier terms on coordinates the equalities do not pin.
    barrier_.assign(dim, false);
    if (basis_.cols() > 0)
      for (std::size_t j = 0; j < dim; ++j) barrier_[j] = basis_.row(j).cwiseAbs().maxCoeff() > 0.0;
    const double nbar = static_cast<double>(std::count(barrier_.begin(), barrier_.end(), true));

    res.status = ProgramStatus::optimal;
    int newton = 0;
    double mu = scale_;
    if (basis_.cols() > 0) {
      const double target = opt.tolerance * scale_;
      while (true) {
        if (!center(x, mu, newton, opt.max_iterations)) {
          res.status = ProgramStatus::iteration_limit;
          break;
        }
        if (nbar * mu <= target * (1.0 + 1e-12)) break;
        mu = std::max(mu * 0.125, target / nbar);
      }
      res.gap = nbar * mu;
    }
    res.iterations = newton;
    project(m, x);
    res.q.assign(payoff_.size(), 0.0);
    for (std::size_t j = 0; j < nf; ++j) res.q[free_[j]] = std::max(0.0, x[j]);
    res.mixture.assign(x.begin() + static_cast<std::ptrdiff_t>(nf), x.end());
    for (double& w : res.mixture) w = std::max(0.0, w);
    res.penalty = mixture_penalty(res.q, refs_, res.mixture, spec_);
    res.value = -res.penalty;
    for (std::size_t i = 0; i < payoff_.size(); ++i) res.value += res.q[i] * payoff_[i];
    return res;
  }

 private:
  // A point of the polytope that is positive on every coordinate some
  // feasible point charges; free_ lists those coordinates.
  bool interior_point(Vec& q) {
    const std::size_t n = payoff_.size();
    constexpr double kPositive = 1e-11;
    std::vector<bool> known(n, false);
    std::vector<Vec> points;
    Vec cost(n);
    for (std::size_t i = 0; i < n; ++i) cost[i] = -payoff_[i];
    double cap = kLinearCap;
    while (true) {
      lp::Problem prob;
      for (std::size_t i = 0; i < n; ++i)
        prob.add_variable(0.0, !charged_[i] ? 0.0 : i < penalized_ || points.empty() ? kInfinity : cap, cost[i]);
      add_polytope_rows(prob, poly_, 0);
      const auto sol = lp::solve(prob);
      if (sol.status != lp::Status::optimal) {
        if (points.empty()) return false;
        // Every feasible point needs a larger unpenalized coordinate.
        if (sol.status == lp::Status::infeasible && cap < kLinearCapLimit) {
          cap *= 10.0;
          continue;
        }
        break;
      }
      bool progress = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (sol.x[i] > kPositive && !known[i]) {
          known[i] = true;
          progress = true;
        }
      }
      points.push_back(sol.x);
      if (!progress && points.size() > 1) break;
      // Next: maximize the total mass on coordinates not yet seen positive.
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        cost[i] = charged_[i] && !known[i] ? -1.0 : 0.0;
        any = any || cost[i] != 0.0;
      }
      if (!any) break;
    }
    q.assign(n, 0.0);
    for (const auto& pt : points)
      for (std::size_t i = 0; i < n; ++i) q[i] += pt[i] / static_cast<double>(points.size());
    free_.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (known[i]) free_.push_back(i);
    return true;
  }

  // Removes the equality residual that rounding leaves in the iterate with a
  // minimum-norm correction. Interior coordinates stay positive.
  void project(const Eigen::MatrixXd& m, Vec& x) const {
    Eigen::VectorXd rhs(m.rows());
    for (std::size_t r = 0; r < poly_.rhs.size(); ++r) rhs[static_cast<Eigen::Index>(r)] = poly_.rhs[r];
    rhs[m.rows() - 1] = 1.0;
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd residual = m * xv - rhs;
    const Eigen::VectorXd delta = m.completeOrthogonalDecomposition().solve(residual);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] -= delta[static_cast<Eigen::Index>(j)];
  }

  // Barrier objective; -infinity outside the open domain.
  double value(const Vec& x, double mu) const {
    const std::size_t nf = free_.size();
    for (std::size_t j = 0; j < x.size(); ++j)
      if (barrier_[j] && !(x[j] > 0.0)) return -kInfinity;
    const Vec w(x.begin() + static_cast<std::ptrdiff_t>(nf), x.end());
    const Vec p = mix(refs_, w);
    double f = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < payoff_.size(); ++i) {
      if (j < nf && free_[j] == i) {
        f += x[j] * payoff_[i];
        if (i < penalized_) f -= p[i] * eval_l_star(spec_, x[j] / p[i]);
        ++j;
      } else if (charged_[i] && i < penalized_) {
        f -= p[i] * eval_l_star(spec_, 0.0);
      }
    }
    for (std::size_t k = 0; k < x.size(); ++k)
      if (barrier_[k]) f += mu * std::log(x[k]);
    return f;
  }

  // Newton iterations on the barrier problem for fixed mu.
  bool center(Vec& x, double mu, int& newton, int max_iterations) {
    const std::size_t nf = free_.size();
    const std::size_t nk = refs_.size();
    const std::size_t dim = x.size();
    const Eigen::Index d = basis_.cols();
    Eigen::VectorXd g(dim), hdiag(dim), u(dim);
    Eigen::MatrixXd hz(d, d);
    for (int it = 0; it < 200; ++it) {
      if (++newton > max_iterations) return false;
      const Vec w(x.begin() + static_cast<std::ptrdiff_t>(nf), x.end());
      const Vec p = mix(refs_, w);
      g.setZero();
      hz.setZero();
      std::size_t j = 0;
      for (std::size_t i = 0; i < payoff_.size(); ++i) {
        if (j < nf && free_[j] == i && i >= penalized_) {
          g[j] += payoff_[i];
          ++j;
        } else if (j < nf && free_[j] == i) {
          const double y = x[j] / p[i];
          const double lp = eval_l_star_prime(spec_, y);
          g[j] += payoff_[i] - lp;
          const double h = eval_l_star(spec_, y) - y * lp;
          for (std::size_t k = 0; k < nk; ++k) g[nf + k] -= refs_[k][i] * h;
          // Rank-one curvature of the perspective along u = e_q - y P e_w.
          u.setZero();
          u[j] = 1.0;
          for (std::size_t k = 0; k < nk; ++k) u[nf + k] = -y * refs_[k][i];
          const Eigen::VectorXd nu = basis_.transpose() * u;
          hz.selfadjointView<Eigen::Lower>().rankUpdate(nu, l_star_second(spec_, y) / p[i]);
          ++j;
        } else if (charged_[i] && i < penalized_) {
          const double l0 = eval_l_star(spec_, 0.0);
          for (std::size_t k = 0; k < nk; ++k) g[nf + k] -= refs_[k][i] * l0;
        }
      }
      for (std::size_t k = 0; k < dim; ++k) {
        hdiag[k] = 0.0;
        if (!barrier_[k]) continue;
        g[k] += mu / x[k];
        hdiag[k] = mu / (x[k] * x[k]);
      }
      hz.triangularView<Eigen::Lower>() += basis_.transpose() * hdiag.asDiagonal() * basis_;
      const Eigen::VectorXd gz = basis_.transpose() * g;
      // Symmetric diagonal scaling before the factorization.
      const Eigen::MatrixXd full = hz.selfadjointView<Eigen::Lower>();
      Eigen::VectorXd dscale = full.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
      Eigen::MatrixXd scaled = dscale.asDiagonal() * full * dscale.asDiagonal();
      scaled.diagonal().array() += 1e-13;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
      if (ldlt.info() != Eigen::Success) return false;
      const Eigen::VectorXd dz = dscale.asDiagonal() * ldlt.solve(dscale.asDiagonal() * gz);
      const double decrement = gz.dot(dz);
      // Centering error below a small fraction of the barrier gap.
      if (decrement <= std::max(1e-3 * mu, 1e-14 * scale_)) return true;
      const Eigen::VectorXd dx = basis_ * dz;

      double step = 1.0;
      for (std::size_t k = 0; k < dim; ++k)
        if (barrier_[k] && dx[k] < 0.0) step = std::min(step, -0.99 * x[k] / dx[k]);
      const double f0 = value(x, mu);
      Vec trial(dim);
      double f1 = -kInfinity;
      for (int ls = 0; ls < 60; ++ls) {
        for (std::size_t k = 0; k < dim; ++k) trial[k] = x[k] + step * dx[k];
        f1 = value(trial, mu);
        if (f1 >= f0 + 0.25 * step * decrement) break;
        step *= 0.5;
      }
      // No ascent left at working precision.
      if (!(f1 >= f0 + 0.25 * step * decrement)) return true;
      x = trial;
      if (f1 - f0 <= 1e-15 * (1.0 + std::abs(f0))) return true;
    }
    return true;
  }

  const EqualitySystem& poly_;
  const Vec& payoff_;
  const std::vector<Vec>& refs_;
  const LossSpec& spec_;
  std::size_t penalized_ = 0;
  std::vector<bool> charged_;
  std::vector<std::size_t> free_;
  Eigen::MatrixXd basis_;
  std::vector<bool> barrier_;
  double scale_ = 1.0;
};

}  // namespace

double mixture_penalty(const Vec& q, const std::vector<Vec>& refs, const Vec& weights, const LossSpec& spec) {
  const Vec p = mix(refs, weights);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += perspective(spec, q[i], p[i]);
  return total;
}

PenalizedResult maximize_penalized(const EqualitySystem& polytope, const Vec& payoff, const std::vector<Vec>& refs,
                                   const LossSpec& spec, const PenalizedOptions& options) {
  if (spec.is_strict_cone()) throw ModelError("penalized program needs a loss function");
  if (refs.empty()) throw ModelError("penalized program needs at least one reference measure");
  for (const auto& r : refs)
    if (r.size() != refs.front().size() || r.size() > payoff.size())
      throw ModelError("reference measure and payoff sizes differ");
  if (spec.is_polyhedral()) return solve_polyhedral(polytope, payoff, refs, spec);
  BarrierProgram program(polytope, payoff, refs, spec);
  return program.run(options);
}

}  // namespace robhedge
