#include "robhedge/primal.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "robhedge/risk.hpp"
#include "robhedge/simplex.hpp"

namespace robhedge {

namespace {

// Strategy coordinates that live on supported internal nodes become LP
// columns; gains at each node are linear in those columns.
struct Layout {
  std::vector<int> column;  // per strategy coordinate; -1 off the support
  int nz = 0;
  std::vector<std::vector<lp::Term>> gains;  // per node, relative to the z block
  std::vector<int> leaves;                   // supported leaf nodes
};

Layout make_layout(const ScenarioTree& tree, const ReferenceMeasureSet& pset) {
  Layout lay;
  const std::size_t d = tree.assets();
  lay.column.assign(tree.internal_nodes().size() * d, -1);
  for (int v : tree.internal_nodes()) {
    if (!pset.supported(v)) continue;
    for (std::size_t j = 0; j < d; ++j) lay.column[tree.internal_index(v) * d + j] = lay.nz++;
  }
  lay.gains.resize(tree.size());
  for (int v : tree.topological_order()) {
    if (!pset.supported(v)) continue;
    if (tree.is_leaf(v)) {
      lay.leaves.push_back(v);
      continue;
    }
    const std::size_t base = tree.internal_index(v) * d;
    for (int c : tree.children(v)) {
      auto terms = lay.gains[v];
      const auto ds = tree.increment(c);
      for (std::size_t j = 0; j < d; ++j)
        if (ds[j] != 0.0) terms.push_back({lay.column[base + j], ds[j]});
      lay.gains[c] = std::move(terms);
    }
  }
  std::sort(lay.leaves.begin(), lay.leaves.end());
  return lay;
}

void append_gains(std::vector<lp::Term>& row, const Layout& lay, int node, int z0, double scale) {
  for (const auto& t : lay.gains[node]) row.push_back({z0 + t.var, scale * t.coef});
}

void add_floor_rows(lp::Problem& prob, const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Layout& lay,
                    int z0, double floor) {
  if (!std::isfinite(floor)) return;
  for (std::size_t v = 0; v < tree.size(); ++v) {
    const int node = static_cast<int>(v);
    if (node == tree.root() || !pset.supported(node) || lay.gains[node].empty()) continue;
    std::vector<lp::Term> row;
    append_gains(row, lay, node, z0, 1.0);
    prob.add_row(std::move(row), lp::Sense::greater_equal, -floor);
  }
}

Strategy strategy_from(const ScenarioTree& tree, const Layout& lay, const Vec& x, int z0) {
  Vec pos(lay.column.size(), 0.0);
  for (std::size_t i = 0; i < pos.size(); ++i)
    if (lay.column[i] >= 0) pos[i] = x[z0 + lay.column[i]];
  return Strategy(tree, std::move(pos));
}

void check_claim(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x) {
  if (x.payoff.size() != tree.leaves().size()) throw ModelError("claim needs one payoff per leaf");
  for (std::size_t i = 0; i < x.payoff.size(); ++i)
    if (pset.supported(tree.leaves()[i]) && !std::isfinite(x.payoff[i]))
      throw ModelError("claim is not finite on a supported leaf");
}

// Y = gains(Z) - X per leaf.
Vec hedged_position(const ScenarioTree& tree, const Strategy& z, const Claim& x) {
  const Vec g = node_gains(tree, z);
  Vec y(x.payoff.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = g[tree.leaves()[i]] - x.payoff[i];
  return y;
}

double strict_risk(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Vec& y) {
  double lo = kInfinity;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (pset.supported(tree.leaves()[i])) lo = std::min(lo, y[i]);
  return -lo;
}

void finish(PrimalSolution& out, const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
            const LossSpec* spec) {
  out.shortfall = hedged_position(tree, out.strategy, x);
  for (double& s : out.shortfall) s += out.price;
  if (spec == nullptr || spec->is_strict_cone()) out.shortfall_risk = strict_risk(tree, pset, out.shortfall);
  else out.shortfall_risk = robust_oce(pset.leaf_probabilities(), out.shortfall, *spec).value;
}

std::optional<double> constant_value(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x) {
  std::optional<double> c;
  for (std::size_t i = 0; i < x.payoff.size(); ++i) {
    if (!pset.supported(tree.leaves()[i])) continue;
    if (c && *c != x.payoff[i]) return std::nullopt;
    c = x.payoff[i];
  }
  return c;
}

// Epigraph LP of the acceptance constraint with l replaced by the max of
// `pieces[i]` at supported leaf i:
//   min m  s.t.  u_i >= s (t - m - gains_i + X_i) + b  for every piece,
//                sum_i P_k(i) u_i <= t  for every reference measure k.
struct Master {
  lp::Solution sol;
  int m = 0, z0 = 0, t = 0, u0 = 0;
};

Master solve_master(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x, const Layout& lay,
                    const std::vector<std::vector<AffinePiece>>& pieces, double floor) {
  Master ms;
  lp::Problem prob;
  ms.m = prob.add_free_variable(1.0);
  ms.z0 = prob.num_variables();
  for (int i = 0; i < lay.nz; ++i) prob.add_free_variable();
  ms.t = prob.add_free_variable();
  ms.u0 = prob.num_variables();
  for (std::size_t i = 0; i < lay.leaves.size(); ++i) {
    // Flat pieces are bounds on u.
    double lower = -kInfinity;
    for (const auto& pc : pieces[i])
      if (pc.slope == 0.0) lower = std::max(lower, pc.intercept);
    prob.add_variable(lower, kInfinity, 0.0);
  }
  for (std::size_t i = 0; i < lay.leaves.size(); ++i) {
    const int leaf = lay.leaves[i];
    const double xi = x.payoff[tree.leaf_index(leaf)];
    for (const auto& pc : pieces[i]) {
      if (pc.slope == 0.0) continue;
      // Divided by the slope to keep steep tangents well scaled.
      const double s = pc.slope;
      std::vector<lp::Term> row{{ms.u0 + static_cast<int>(i), 1.0 / s}, {ms.t, -1.0}, {ms.m, 1.0}};
      append_gains(row, lay, leaf, ms.z0, 1.0);
      prob.add_row(std::move(row), lp::Sense::greater_equal, xi + pc.intercept / s);
    }
  }
  for (const auto& p : pset.leaf_probabilities()) {
    std::vector<lp::Term> row{{ms.t, -1.0}};
    for (std::size_t i = 0; i < lay.leaves.size(); ++i) {
      const double pr = p[tree.leaf_index(lay.leaves[i])];
      if (pr > 0.0) row.push_back({ms.u0 + static_cast<int>(i), pr});
    }
    prob.add_row(std::move(row), lp::Sense::less_equal, 0.0);
  }
  add_floor_rows(prob, tree, pset, lay, ms.z0, floor);
  ms.sol = lp::solve(prob);
  return ms;
}

PrimalSolution polyhedral_price(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                                const LossSpec& spec, double floor) {
  const Layout lay = make_layout(tree, pset);
  const std::vector<std::vector<AffinePiece>> pieces(lay.leaves.size(), spec.pieces());
  const Master ms = solve_master(tree, pset, x, lay, pieces, floor);
  PrimalSolution out(tree);
  out.iterations = ms.sol.pivots;
  if (ms.sol.status == lp::Status::unbounded) {
    out.status = SolveStatus::nonviable;
    out.price = out.lower_bound = -kInfinity;
    return out;
  }
  if (ms.sol.status != lp::Status::optimal) throw SolverError(std::string("acceptance LP: ") + lp::to_string(ms.sol.status));
  out.price = out.lower_bound = ms.sol.objective;
  out.strategy = strategy_from(tree, lay, ms.sol.x, ms.z0);
  finish(out, tree, pset, x, &spec);
  return out;
}

double l_second(const LossSpec& spec, double a) {
  if (spec.kind() == LossKind::power) return a > 0.0 ? (spec.p() - 1.0) * std::pow(a, spec.p() - 2.0) : 0.0;
  return std::exp(a);
}

// Log-barrier Newton method for a smooth loss on the epigraph form
//   min theta - m  s.t.  E_{P_k}[l(m + X - gains(Z))] <= theta  for every k,
//                        gains(Z) >= -floor at supported nodes.
// Some nodes can be pushed up without bound: with no floor, those no
// martingale measure charges; with a floor, those some strategy with
// nonnegative gains at every node makes positive. Their leaves sit at inf l
// in the limit. Z splits into y along the row space of the gains at the
// other nodes, which the barrier optimizes, and a kernel part that only moves
// pushed nodes; an LP sets the kernel part afterwards.
class BarrierPrimal {
 public:
  BarrierPrimal(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x, const LossSpec& spec,
                double floor, const PrimalOptions& opt)
      : tree_(tree), pset_(pset), x_(x), spec_(spec), floor_(floor), opt_(opt), lay_(make_layout(tree, pset)) {
    if (std::isfinite(floor_)) find_pushed_by_floor_arbitrage();
    else find_pushed_by_arbitrage();
    split_positions();
    std::vector<int> live;
    for (int leaf : lay_.leaves)
      if (!pushed_[leaf]) live.push_back(leaf);
    const auto nl = static_cast<Eigen::Index>(live.size());
    xl_.resize(nl);
    Eigen::MatrixXd a_full = Eigen::MatrixXd::Zero(nl, lay_.nz);
    for (Eigen::Index i = 0; i < nl; ++i) {
      xl_[i] = x.payoff[tree.leaf_index(live[i])];
      a_full.row(i) = gains_row(live[i]).transpose();
    }
    b_ = a_full * basis_;
    const double l_inf = spec.kind() == LossKind::entropic ? -1.0 : 0.0;
    for (const auto& p : pset.leaf_probabilities()) {
      Eigen::VectorXd pk(nl);
      for (Eigen::Index i = 0; i < nl; ++i) pk[i] = p[tree.leaf_index(live[i])];
      double dead = 0.0;
      for (int leaf : lay_.leaves)
        if (pushed_[leaf]) dead += p[tree.leaf_index(leaf)];
      probs_.push_back(std::move(pk));
      dead_loss_.push_back(dead * l_inf);
    }
    scale_ = std::max(1.0, nl > 0 ? xl_.cwiseAbs().maxCoeff() : 0.0);
    kink_ = 1e-6 * scale_;
    if (std::isfinite(floor_)) {
      for (std::size_t v = 0; v < tree.size(); ++v) {
        const int node = static_cast<int>(v);
        if (node == tree.root() || !pset.supported(node) || lay_.gains[node].empty()) continue;
        const Eigen::VectorXd r = gains_row(node);
        // Rows the kernel part can move are left to the pushed-node LP.
        if (pushed_[node] && (kernel_.transpose() * r).norm() > 1e-10 * std::max(1.0, r.norm())) continue;
        const Eigen::VectorXd dir = basis_.transpose() * r;
        if (dir.size() == 0 || dir.norm() <= 1e-12 * std::max(1.0, r.norm())) continue;
        floor_dir_.push_back(dir);
      }
    }
  }

  PrimalSolution run() {
    PrimalSolution out(tree_);
    out.iterations = support_pivots_;
    if (xl_.size() == 0) {
      out.status = SolveStatus::nonviable;
      out.price = out.lower_bound = -kInfinity;
      return out;
    }
    const Eigen::Index ny = basis_.cols();
    const Eigen::Index n = ny + 2;  // m, y, theta
    v_ = Eigen::VectorXd::Zero(n);
    v_[0] = 1.0 - xl_.maxCoeff();
    double worst = -kInfinity;
    for (std::size_t k = 0; k < probs_.size(); ++k) worst = std::max(worst, expected_loss(k, leaf_args(v_)));
    v_[n - 1] = worst + scale_;

    const double barriers = static_cast<double>(probs_.size() + floor_dir_.size());
    double tau = barriers / scale_;
    int steps = 0;
    out.status = SolveStatus::iteration_limit;
    for (;;) {
      steps += center(tau, std::min(kStageSteps, opt_.max_iterations - steps));
      const double obj = v_[n - 1] - v_[0];
      if (!std::isfinite(obj) || obj < -kUnbounded * scale_) throw SolverError("barrier: acceptance program diverged");
      if (!centered_) break;
      if (barriers / tau <= opt_.tolerance * std::max(scale_, std::abs(obj))) {
        out.status = SolveStatus::optimal;
        break;
      }
      if (steps >= opt_.max_iterations) break;
      tau *= 8.0;
    }
    out.iterations += steps;
    Eigen::VectorXd z = basis_ * v_.segment(1, ny);
    settle_pushed(z, v_[0], out);
    out.strategy = strategy_from(tree_, lay_, Vec(z.data(), z.data() + z.size()), 0);
    out.price = robust_oce(pset_.leaf_probabilities(), hedged_position(tree_, out.strategy, x_), spec_).value;
    out.lower_bound = v_[n - 1] - v_[0] - barriers / tau;
    // A stalled path still yields the gap estimate; accept it when tight.
    if (out.status != SolveStatus::optimal &&
        out.price - out.lower_bound <= kStallTolerance * std::max(scale_, std::abs(out.price)))
      out.status = SolveStatus::optimal;
    finish(out, tree_, pset_, x_, &spec_);
    return out;
  }

 private:
  static constexpr double kUnbounded = 1e9;
  static constexpr int kStageSteps = 100;
  static constexpr double kStallTolerance = 1e-8;

  Eigen::VectorXd gains_row(int node) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(lay_.nz);
    for (const auto& t : lay_.gains[node]) r[t.var] += t.coef;
    return r;
  }

  // With no floor: one LP over the cone of martingale leaf weights q finds
  // the largest support (maximize sum s with s <= q, s <= 1); uncharged nodes
  // are pushed.
  void find_pushed_by_arbitrage() {
    NodeMask live(tree_.size(), false);
    const int nl = static_cast<int>(lay_.leaves.size());
    lp::Problem prob;
    for (int i = 0; i < nl; ++i) prob.add_variable();
    for (int i = 0; i < nl; ++i) prob.add_variable(0.0, 1.0, -1.0);
    std::vector<std::vector<lp::Term>> mart(static_cast<std::size_t>(lay_.nz));
    for (int i = 0; i < nl; ++i) {
      for (const auto& t : lay_.gains[lay_.leaves[i]]) mart[t.var].push_back({i, t.coef});
      prob.add_row({{nl + i, 1.0}, {i, -1.0}}, lp::Sense::less_equal, 0.0);
    }
    for (auto& row : mart)
      if (!row.empty()) prob.add_row(std::move(row), lp::Sense::equal, 0.0);
    const auto sol = lp::solve(prob);
    support_pivots_ = sol.pivots;
    if (sol.status != lp::Status::optimal)
      throw SolverError(std::string("martingale support LP: ") + lp::to_string(sol.status));
    for (int i = 0; i < nl; ++i) {
      if (sol.x[nl + i] < 0.5) continue;
      for (int v = lay_.leaves[i]; v >= 0 && !live[v]; v = v == tree_.root() ? -1 : tree_.parent(v)) live[v] = true;
    }
    pushed_.assign(tree_.size(), false);
    for (std::size_t v = 0; v < tree_.size(); ++v) pushed_[v] = pset_.supported(static_cast<int>(v)) && !live[v];
  }

  // With a floor: nodes that some Z with gains >= 0 at every supported node
  // makes positive (maximize sum s with s <= gains, s <= 1).
  void find_pushed_by_floor_arbitrage() {
    pushed_.assign(tree_.size(), false);
    std::vector<int> nodes;
    for (std::size_t v = 0; v < tree_.size(); ++v)
      if (pset_.supported(static_cast<int>(v)) && !lay_.gains[v].empty()) nodes.push_back(static_cast<int>(v));
    if (nodes.empty()) return;
    lp::Problem prob;
    for (int j = 0; j < lay_.nz; ++j) prob.add_free_variable();
    for (std::size_t i = 0; i < nodes.size(); ++i) prob.add_variable(0.0, 1.0, -1.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      std::vector<lp::Term> row{{lay_.nz + static_cast<int>(i), -1.0}};
      for (const auto& t : lay_.gains[nodes[i]]) row.push_back(t);
      prob.add_row(std::move(row), lp::Sense::greater_equal, 0.0);
    }
    const auto sol = lp::solve(prob);
    support_pivots_ = sol.pivots;
    if (sol.status != lp::Status::optimal)
      throw SolverError(std::string("arbitrage support LP: ") + lp::to_string(sol.status));
    for (std::size_t i = 0; i < nodes.size(); ++i) pushed_[nodes[i]] = sol.x[lay_.nz + static_cast<int>(i)] > 0.5;
  }

  // basis_: row space of the gains at nodes that are not pushed; kernel_:
  // its complement. With floor 0 those gains vanish, so only the kernel
  // remains.
  void split_positions() {
    std::vector<int> rows;
    for (std::size_t v = 0; v < tree_.size(); ++v)
      if (pset_.supported(static_cast<int>(v)) && !pushed_[v] && !lay_.gains[v].empty()) rows.push_back(static_cast<int>(v));
    Eigen::MatrixXd g(static_cast<Eigen::Index>(rows.size()), lay_.nz);
    for (std::size_t i = 0; i < rows.size(); ++i) g.row(static_cast<Eigen::Index>(i)) = gains_row(rows[i]).transpose();
    Eigen::Index rank = 0;
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(lay_.nz, lay_.nz);
    if (g.rows() > 0 && lay_.nz > 0) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > 1e-10 * sv[0]) ++rank;
      v = svd.matrixV();
    }
    basis_ = v.leftCols(floor_ <= 0.0 ? 0 : rank);
    kernel_ = v.rightCols(lay_.nz - rank);
  }

  // Kernel part: pushed leaves go to where l is flat (or negligible), and
  // the floor holds at pushed nodes.
  void settle_pushed(Eigen::VectorXd& z, double m, PrimalSolution& out) const {
    bool any = false;
    for (int leaf : lay_.leaves) any = any || pushed_[leaf];
    const Eigen::Index nk = kernel_.cols();
    if (!any && (!std::isfinite(floor_) || floor_ > 0.0)) return;
    const double lo = spec_.kind() == LossKind::entropic ? -40.0 : 0.0;
    lp::Problem prob;
    for (Eigen::Index i = 0; i < nk; ++i) prob.add_free_variable();
    auto add = [&](int node, double rhs) {
      const Eigen::VectorXd r = gains_row(node);
      const Eigen::VectorXd coef = kernel_.transpose() * r;
      rhs -= r.dot(z);
      std::vector<lp::Term> row;
      for (Eigen::Index i = 0; i < nk; ++i)
        if (std::abs(coef[i]) > 1e-12 * std::max(1.0, r.norm())) row.push_back({static_cast<int>(i), coef[i]});
      // Rows the kernel cannot move are held by the barrier.
      if (!row.empty()) prob.add_row(std::move(row), lp::Sense::greater_equal, rhs);
    };
    for (std::size_t v = 0; v < tree_.size(); ++v) {
      const int node = static_cast<int>(v);
      if (!pset_.supported(node) || !pushed_[node] || lay_.gains[node].empty()) continue;
      if (std::isfinite(floor_)) add(node, -floor_);
      if (tree_.is_leaf(node)) add(node, m + x_.payoff[tree_.leaf_index(node)] - lo);
    }
    if (prob.num_rows() == 0) return;
    const auto sol = lp::solve(prob);
    out.iterations += sol.pivots;
    if (sol.status != lp::Status::optimal) throw SolverError(std::string("pushed-node LP: ") + lp::to_string(sol.status));
    z += kernel_ * Eigen::Map<const Eigen::VectorXd>(sol.x.data(), nk);
  }

  Eigen::VectorXd leaf_args(const Eigen::VectorXd& v) const {
    return (xl_ - b_ * v.segment(1, b_.cols())).array() + v[0];
  }

  double expected_loss(std::size_t k, const Eigen::VectorXd& a) const {
    const Eigen::VectorXd& pk = probs_[k];
    double s = dead_loss_[k];
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (pk[i] > 0.0) s += pk[i] * eval_l(spec_, a[i]);
    return s;
  }

  // Barrier slacks: theta - E_k[l] per measure, then the floor rows. Empty
  // outside the domain.
  std::vector<double> slacks(const Eigen::VectorXd& v) const {
    const Eigen::Index n = v.size();
    const Eigen::VectorXd a = leaf_args(v);
    std::vector<double> out;
    for (std::size_t k = 0; k < probs_.size(); ++k) {
      const double s = v[n - 1] - expected_loss(k, a);
      if (!(s > 0.0)) return {};
      out.push_back(s);
    }
    for (const auto& dir : floor_dir_) {
      const double h = floor_ + dir.dot(v.segment(1, n - 2));
      if (!(h > 0.0)) return {};
      out.push_back(h);
    }
    return out;
  }

  int center(double tau, int budget) {
    const Eigen::Index n = v_.size();
    const Eigen::Index ny = n - 2;
    std::vector<double> cur = slacks(v_);
    centered_ = false;
    int it = 0;
    for (; it < std::max(budget, 1); ++it) {
      const Eigen::VectorXd a = leaf_args(v_);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n, n);
      grad[0] = -tau;
      grad[n - 1] = tau;
      Eigen::VectorXd l1(a.size()), l2(a.size());
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        l1[i] = eval_l_prime(spec_, a[i]);
        l2[i] = l_second(spec_, a[i]);
        // For p < 2 the curvature blows up at the kink; bound it there.
        if (spec_.kind() == LossKind::power && spec_.p() < 2.0 && a[i] > -kink_)
          l2[i] = l_second(spec_, std::max(a[i], kink_));
      }
      for (std::size_t k = 0; k < probs_.size(); ++k) {
        const Eigen::VectorXd& pk = probs_[k];
        const double s = v_[n - 1] - expected_loss(k, a);
        // d a_i / d(m, y) = (1, -b_i).
        const Eigen::VectorXd w1 = pk.cwiseProduct(l1);
        const Eigen::VectorXd w2 = pk.cwiseProduct(l2);
        Eigen::VectorXd dg = Eigen::VectorXd::Zero(n);
        dg[0] = w1.sum();
        dg.segment(1, ny) = -b_.transpose() * w1;
        dg[n - 1] = -1.0;
        grad += dg / s;
        hess.noalias() += dg * dg.transpose() / (s * s);
        hess(0, 0) += w2.sum() / s;
        const Eigen::VectorXd bw = b_.transpose() * w2;
        hess.block(1, 0, ny, 1) -= bw / s;
        hess.block(0, 1, 1, ny) -= bw.transpose() / s;
        hess.block(1, 1, ny, ny).noalias() += b_.transpose() * w2.asDiagonal() * b_ / s;
      }
      for (const auto& dir : floor_dir_) {
        const double h = floor_ + dir.dot(v_.segment(1, ny));
        grad.segment(1, ny) -= dir / h;
        hess.block(1, 1, ny, ny).noalias() += dir * dir.transpose() / (h * h);
      }
      // Symmetric diagonal scaling, then a small ridge for directions the
      // program does not see.
      const Eigen::VectorXd dscale =
          hess.diagonal().unaryExpr([](double h) { return h > 0.0 ? 1.0 / std::sqrt(h) : 1.0; });
      Eigen::MatrixXd scaled = dscale.asDiagonal() * hess * dscale.asDiagonal();
      scaled.diagonal().array() += 1e-12;
      const Eigen::VectorXd step = dscale.cwiseProduct(scaled.ldlt().solve(-dscale.cwiseProduct(grad)));
      const double decrement = -grad.dot(step);
      if (!std::isfinite(decrement)) break;
      if (decrement <= 1e-12) {
        centered_ = true;
        break;
      }
      // Change of the barrier function along the step, formed from ratios of
      // slacks so that tau * objective does not swamp it.
      auto change = [&](double t, std::vector<double>& next) {
        next = slacks(v_ + t * step);
        if (next.empty()) return kInfinity;
        double d = tau * t * (step[n - 1] - step[0]);
        for (std::size_t j = 0; j < next.size(); ++j) d -= std::log(next[j] / cur[j]);
        return d;
      };
      // Long steps along directions where l is flat are capped in leaf units.
      const Eigen::VectorXd da = (-(b_ * step.segment(1, ny))).array() + step[0];
      const double reach = std::max(da.size() > 0 ? da.cwiseAbs().maxCoeff() : 0.0, std::abs(step[n - 1]));
      double t = std::min(1.0, 10.0 * scale_ / reach);
      std::vector<double> next;
      double d = kInfinity;
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        d = change(t, next);
        if (d <= -0.25 * t * decrement) break;
      }
      // No measurable progress: the step is limited by rounding.
      if (!(d < -1e-13) || (t * step).cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + v_.cwiseAbs().maxCoeff())) {
        centered_ = decrement <= 1e-4;
        break;
      }
      v_ += t * step;
      cur = std::move(next);
      if (v_[n - 1] - v_[0] < -kUnbounded * scale_) break;
      // Below this the decrement is dominated by rounding in the slacks.
      if (decrement <= 1e-7) {
        centered_ = true;
        break;
      }
    }
    return it + 1;
  }

  const ScenarioTree& tree_;
  const ReferenceMeasureSet& pset_;
  const Claim& x_;
  const LossSpec& spec_;
  double floor_;
  PrimalOptions opt_;
  Layout lay_;
  NodeMask pushed_;
  int support_pivots_ = 0;
  Eigen::MatrixXd basis_;   // positions -> y
  Eigen::MatrixXd kernel_;  // positions that only move pushed nodes
  Eigen::MatrixXd b_;       // gains at the other leaves per y coordinate
  Eigen::VectorXd xl_;      // claim at those leaves
  std::vector<Eigen::VectorXd> probs_;
  std::vector<double> dead_loss_;  // P_k(pushed leaves) * inf l
  double scale_ = 1.0;
  std::vector<Eigen::VectorXd> floor_dir_;
  Eigen::VectorXd v_;
  bool centered_ = false;
  double kink_ = 0.0;
};

}  // namespace

PrimalSolution superhedge_price(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                                double floor) {
  check_claim(tree, pset, x);
  if (floor < 0.0) throw ModelError("admissibility floor must be nonnegative");
  const Layout lay = make_layout(tree, pset);
  lp::Problem prob;
  const int m = prob.add_free_variable(1.0);
  const int z0 = prob.num_variables();
  for (int i = 0; i < lay.nz; ++i) prob.add_free_variable();
  for (int leaf : lay.leaves) {
    std::vector<lp::Term> row{{m, 1.0}};
    append_gains(row, lay, leaf, z0, 1.0);
    prob.add_row(std::move(row), lp::Sense::greater_equal, x.payoff[tree.leaf_index(leaf)]);
  }
  add_floor_rows(prob, tree, pset, lay, z0, floor);
  const auto sol = lp::solve(prob);

  PrimalSolution out(tree);
  out.iterations = sol.pivots;
  if (sol.status == lp::Status::unbounded) {
    out.status = SolveStatus::nonviable;
    out.price = out.lower_bound = -kInfinity;
    return out;
  }
  if (sol.status != lp::Status::optimal) throw SolverError(std::string("superhedging LP: ") + lp::to_string(sol.status));
  const auto c = std::isfinite(floor) ? std::nullopt : constant_value(tree, pset, x);
  if (c) {
    out.price = *c;
  } else {
    out.price = sol.objective;
    out.strategy = strategy_from(tree, lay, sol.x, z0);
  }
  out.lower_bound = out.price;
  finish(out, tree, pset, x, nullptr);
  return out;
}

PrimalSolution accept_price_bounded(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                                    const LossSpec& spec, double floor, const PrimalOptions& options) {
  check_claim(tree, pset, x);
  if (floor < 0.0) throw ModelError("admissibility floor must be nonnegative");
  if (spec.is_strict_cone()) return superhedge_price(tree, pset, x, floor);
  if (spec.is_polyhedral()) return polyhedral_price(tree, pset, x, spec, floor);
  return BarrierPrimal(tree, pset, x, spec, floor, options).run();
}

PrimalSolution accept_price(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                            const LossSpec& spec, const PrimalOptions& options) {
  return accept_price_bounded(tree, pset, x, spec, kInfinity, options);
}

InfconvReport infconv_check(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                            const LossSpec& spec, double floor, const StrategyGrid& grid) {
  check_claim(tree, pset, x);
  if (!(grid.step > 0.0) || !(grid.radius >= grid.step) || !(grid.refine_factor > 1.0) || grid.rounds < 0)
    throw ModelError("invalid strategy grid");
  const std::size_t d = tree.assets();
  struct Coord {
    std::size_t index;
    double scale;
  };
  std::vector<Coord> coords;
  for (int v : tree.internal_nodes()) {
    if (!pset.supported(v)) continue;
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (int c : tree.children(v)) s = std::max(s, std::abs(tree.increment(c)[j]));
      if (s > 0.0) coords.push_back({tree.internal_index(v) * d + j, s});
    }
  }
  if (coords.size() > 3) throw ModelError("inf-convolution grid supports at most 3 strategy coordinates");

  InfconvReport rep;
  Vec positions(tree.internal_nodes().size() * d, 0.0);
  auto objective = [&](const Vec& point) {
    for (std::size_t k = 0; k < coords.size(); ++k) positions[coords[k].index] = point[k];
    const Strategy z(tree, positions);
    const Vec g = node_gains(tree, z);
    for (std::size_t v = 0; v < tree.size(); ++v)
      if (pset.supported(static_cast<int>(v)) && g[v] < -floor - 1e-12) return kInfinity;
    const Vec y = hedged_position(tree, z, x);
    if (spec.is_strict_cone()) return strict_risk(tree, pset, y);
    return robust_oce(pset.leaf_probabilities(), y, spec).value;
  };

  Vec center(coords.size(), 0.0);
  double step = grid.step;
  long long half = static_cast<long long>(std::floor(grid.radius / grid.step));
  for (int round = 0; round <= grid.rounds; ++round) {
    long long count = 1;
    for (std::size_t k = 0; k < coords.size(); ++k) {
      count *= 2 * half + 1;
      if (count > 10000000) throw ModelError("strategy grid exceeds 1e7 points");
    }
    std::vector<long long> idx(coords.size(), -half);
    Vec point(coords.size());
    Vec best_point = center;
    double best = rep.grid_value;
    std::vector<long long> best_idx(coords.size(), 0);
    for (long long n = 0; n < count; ++n) {
      for (std::size_t k = 0; k < coords.size(); ++k) point[k] = center[k] + idx[k] * step / coords[k].scale;
      const double v = objective(point);
      if (v < best) {
        best = v;
        best_point = point;
        best_idx = idx;
      }
      for (std::size_t k = 0; k < coords.size(); ++k) {
        if (++idx[k] <= half) break;
        idx[k] = -half;
      }
    }
    rep.points += count;
    if (round == 0) {
      for (long long i : best_idx)
        if (std::abs(i) == half) rep.bracketed = false;
    }
    rep.grid_value = best;
    center = best_point;
    rep.final_step = step;
    step /= grid.refine_factor;
    half = static_cast<long long>(std::llround(2.0 * grid.refine_factor));
  }
  rep.best = center;
  rep.psi_c = accept_price_bounded(tree, pset, x, spec, floor).price;
  rep.difference = rep.grid_value - rep.psi_c;
  return rep;
}

}  // namespace robhedge
