#include "robhedge/dual.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "robhedge/risk.hpp"
#include "robhedge/simplex.hpp"

namespace robhedge {

namespace {

constexpr double kZeroFloorCost = 1e-6;

void check_claim(const ScenarioTree& tree, const Claim& x) {
  if (x.payoff.size() != tree.leaves().size()) throw ModelError("claim needs one payoff per leaf");
}

// Row index per (supported internal node, asset); -1 when the row is absent.
struct RowIndex {
  std::vector<int> row;
  std::size_t assets = 0;
  int at(const ScenarioTree& tree, int node, std::size_t j) const {
    return row[tree.internal_index(node) * assets + j];
  }
};

// Adds the increments along the path from `node` up to the root into the
// conditional-mean rows, scaled by `weight`, in column `col`.
void add_path(const ScenarioTree& tree, const RowIndex& idx, EqualitySystem& sys, int node, std::size_t col) {
  for (int v = node; v != tree.root(); v = tree.parent(v)) {
    const int a = tree.parent(v);
    const auto ds = tree.increment(v);
    for (std::size_t j = 0; j < idx.assets; ++j) {
      const int r = idx.at(tree, a, j);
      if (r >= 0) sys.rows[r][col] += ds[j];
    }
  }
}

RowIndex mean_rows(const ScenarioTree& tree, const NodeMask& support) {
  RowIndex idx;
  idx.assets = tree.assets();
  idx.row.assign(tree.internal_nodes().size() * idx.assets, -1);
  int next = 1;  // row 0 is the normalization
  for (int v : tree.internal_nodes()) {
    if (!support[v]) continue;
    for (std::size_t j = 0; j < idx.assets; ++j) {
      bool moves = false;
      for (int c : tree.children(v))
        if (support[c] && tree.increment(c)[j] != 0.0) moves = true;
      if (moves) idx.row[tree.internal_index(v) * idx.assets + j] = next++;
    }
  }
  return idx;
}

// Supported non-root nodes that carry a floor multiplier.
std::vector<int> floor_nodes(const ScenarioTree& tree, const NodeMask& support) {
  std::vector<int> nodes;
  for (std::size_t v = 0; v < tree.size(); ++v) {
    const int node = static_cast<int>(v);
    if (node != tree.root() && support[node]) nodes.push_back(node);
  }
  return nodes;
}

// Martingale system extended by one column per floor node.
struct Extended {
  MartingalePolytope poly;
  std::vector<int> nodes;
};

Extended extend(const ScenarioTree& tree, MartingalePolytope poly, bool with_floor) {
  Extended ext;
  if (with_floor) {
    ext.nodes = floor_nodes(tree, poly.support);
    const RowIndex idx = mean_rows(tree, poly.support);
    const std::size_t n = poly.variables();
    for (auto& row : poly.system.rows) row.resize(n + ext.nodes.size(), 0.0);
    for (std::size_t k = 0; k < ext.nodes.size(); ++k) add_path(tree, idx, poly.system, ext.nodes[k], n + k);
  }
  ext.poly = std::move(poly);
  return ext;
}

void fill_solution(DualSolution& out, const ScenarioTree& tree, const Extended& ext, const Claim& x, const Vec& sol,
                   double floor) {
  const std::size_t n = ext.poly.variables();
  Vec qv(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(n));
  for (double& q : qv) q = std::max(0.0, q);
  out.q = ext.poly.expand(qv);
  out.expectation = 0.0;
  for (std::size_t i = 0; i < out.q.size(); ++i)
    if (out.q[i] > 0.0) out.expectation += out.q[i] * x.payoff[i];
  out.floor_cost = 0.0;
  if (!ext.nodes.empty()) {
    out.node_multipliers.assign(tree.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < ext.nodes.size(); ++k) {
      const double mu = std::max(0.0, sol[n + k]);
      out.node_multipliers[ext.nodes[k]] = mu;
      total += mu;
    }
    out.floor_cost = floor * total;
  }
}

DualSolution lp_dual(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x, double floor) {
  check_claim(tree, x);
  const Extended ext = extend(tree, build_polytope(tree, pset), std::isfinite(floor));
  const std::size_t n = ext.poly.variables();
  lp::Problem prob;
  for (std::size_t j = 0; j < n; ++j) prob.add_variable(0.0, kInfinity, -x.payoff[ext.poly.leaves[j]]);
  for (std::size_t k = 0; k < ext.nodes.size(); ++k) prob.add_variable(0.0, kInfinity, floor);
  const auto& sys = ext.poly.system;
  for (std::size_t r = 0; r < sys.rows.size(); ++r) {
    std::vector<lp::Term> terms;
    for (std::size_t c = 0; c < sys.rows[r].size(); ++c)
      if (sys.rows[r][c] != 0.0) terms.push_back({static_cast<int>(c), sys.rows[r][c]});
    prob.add_row(std::move(terms), lp::Sense::equal, sys.rhs[r]);
  }
  const auto sol = lp::solve(prob);
  DualSolution out;
  out.iterations = sol.pivots;
  out.mixture.assign(pset.size(), 0.0);
  if (sol.status == lp::Status::infeasible) return out;
  if (sol.status != lp::Status::optimal) throw SolverError(std::string("superhedging dual LP: ") + lp::to_string(sol.status));
  out.status = SolveStatus::optimal;
  fill_solution(out, tree, ext, x, sol.x, floor);
  out.penalty = 0.0;
  out.mixture.assign(pset.size(), 1.0 / static_cast<double>(pset.size()));
  out.value = out.expectation - out.floor_cost;
  return out;
}

DualSolution penalized_dual(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                            const LossSpec& spec, double floor, const PenalizedOptions& options) {
  check_claim(tree, x);
  if (spec.is_strict_cone()) return lp_dual(tree, pset, x, floor);
  const Extended ext = extend(tree, build_polytope(tree, pset), std::isfinite(floor));
  const std::size_t n = ext.poly.variables();
  Vec payoff(n + ext.nodes.size(), -floor);
  for (std::size_t j = 0; j < n; ++j) payoff[j] = x.payoff[ext.poly.leaves[j]];
  std::vector<Vec> refs;
  for (const auto& p : pset.leaf_probabilities()) refs.push_back(ext.poly.restrict(p));

  if (floor == 0.0 && !spec.is_polyhedral()) {
    // Multipliers cost nothing at a zero floor and the barrier would follow
    // them to infinity. A tiny cost keeps them bounded; the (Q, mu) returned
    // stays feasible, so its value remains a valid lower bound.
    double scale = 1.0;
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(payoff[j]));
    std::fill(payoff.begin() + static_cast<std::ptrdiff_t>(n), payoff.end(), -kZeroFloorCost * scale);
  }
  const PenalizedResult res = maximize_penalized(ext.poly.system, payoff, refs, spec, options);
  DualSolution out;
  out.iterations = res.iterations;
  out.mixture.assign(pset.size(), 0.0);
  if (res.status == ProgramStatus::infeasible) return out;
  out.status = res.status == ProgramStatus::optimal ? SolveStatus::optimal : SolveStatus::iteration_limit;
  if (res.q.size() != payoff.size()) return out;
  fill_solution(out, tree, ext, x, res.q, floor);
  out.mixture = res.mixture;
  out.reference = static_cast<int>(std::max_element(out.mixture.begin(), out.mixture.end()) - out.mixture.begin());
  out.penalty = mixture_penalty(ext.poly.restrict(out.q), refs, out.mixture, spec);
  out.value = out.expectation - out.penalty - out.floor_cost;
  return out;
}

Certificate certify(std::string name, bool passed, double value, double tolerance) {
  return {std::move(name), passed, value, tolerance};
}

double martingale_residual(const ScenarioTree& tree, const Vec& q_leaf) {
  // Unconditional drift sum_{leaves under v} q * dS(v -> child), relative.
  Vec node_q(tree.size(), 0.0);
  for (std::size_t i = 0; i < q_leaf.size(); ++i) node_q[tree.leaves()[i]] = q_leaf[i];
  const auto& order = tree.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (*it != tree.root()) node_q[tree.parent(*it)] += node_q[*it];
  double worst = 0.0;
  for (int v : tree.internal_nodes()) {
    for (std::size_t j = 0; j < tree.assets(); ++j) {
      double drift = 0.0;
      for (int c : tree.children(v)) drift += node_q[c] * tree.increment(c)[j];
      worst = std::max(worst, std::abs(drift) / std::max(1.0, std::abs(tree.price(v)[j])));
    }
  }
  return worst;
}

}  // namespace

Vec MartingalePolytope::expand(std::span<const double> x) const {
  Vec out(num_leaves, 0.0);
  for (std::size_t j = 0; j < leaves.size(); ++j) out[leaves[j]] = x[j];
  return out;
}

Vec MartingalePolytope::restrict(std::span<const double> leaf_values) const {
  Vec out(leaves.size());
  for (std::size_t j = 0; j < leaves.size(); ++j) out[j] = leaf_values[leaves[j]];
  return out;
}

MartingalePolytope build_polytope(const ScenarioTree& tree, const ReferenceMeasureSet& pset) {
  MartingalePolytope poly;
  poly.support = pset.support();
  poly.num_leaves = tree.leaves().size();
  for (std::size_t i = 0; i < tree.leaves().size(); ++i)
    if (poly.support[tree.leaves()[i]]) poly.leaves.push_back(static_cast<int>(i));
  const RowIndex idx = mean_rows(tree, poly.support);
  const int rows = 1 + static_cast<int>(std::count_if(idx.row.begin(), idx.row.end(), [](int r) { return r >= 0; }));
  poly.system.rows.assign(rows, Vec(poly.variables(), 0.0));
  poly.system.rhs.assign(rows, 0.0);
  poly.system.rhs[0] = 1.0;
  for (std::size_t j = 0; j < poly.variables(); ++j) {
    poly.system.rows[0][j] = 1.0;
    add_path(tree, idx, poly.system, tree.leaves()[poly.leaves[j]], j);
  }
  return poly;
}

DualSolution superhedge_dual(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x, double floor) {
  if (floor < 0.0) throw ModelError("admissibility floor must be nonnegative");
  return lp_dual(tree, pset, x, floor);
}

DualSolution dual_price(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                        const LossSpec& spec, const PenalizedOptions& options) {
  return penalized_dual(tree, pset, x, spec, kInfinity, options);
}

DualSolution dual_price_bounded(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                                const LossSpec& spec, double floor, const PenalizedOptions& options) {
  if (floor < 0.0) throw ModelError("admissibility floor must be nonnegative");
  return penalized_dual(tree, pset, x, spec, floor, options);
}

ViabilityReport viability_check(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const LossSpec& spec) {
  const MartingalePolytope poly = build_polytope(tree, pset);
  const std::size_t n = poly.variables();
  const std::size_t nk = pset.size();
  std::vector<Vec> refs;
  for (const auto& p : pset.leaf_probabilities()) refs.push_back(poly.restrict(p));

  lp::Problem prob;
  for (std::size_t j = 0; j < n; ++j) prob.add_variable();
  const int w0 = prob.num_variables();
  for (std::size_t k = 0; k < nk; ++k) prob.add_variable();
  for (std::size_t r = 0; r < poly.equations(); ++r) {
    std::vector<lp::Term> terms;
    for (std::size_t c = 0; c < n; ++c)
      if (poly.system.rows[r][c] != 0.0) terms.push_back({static_cast<int>(c), poly.system.rows[r][c]});
    prob.add_row(std::move(terms), lp::Sense::equal, poly.system.rhs[r]);
  }
  {
    std::vector<lp::Term> terms;
    for (std::size_t k = 0; k < nk; ++k) terms.push_back({w0 + static_cast<int>(k), 1.0});
    prob.add_row(std::move(terms), lp::Sense::equal, 1.0);
  }
  // Effective domain of l*: s_min <= dQ/dP <= s_max under the mixture. Smooth
  // conjugates are finite on [0, inf), where the uniform mixture charges
  // every supported leaf.
  if (spec.is_polyhedral()) {
    const auto slopes = spec.kink_slopes();
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<lp::Term> upper{{static_cast<int>(j), 1.0}};
      std::vector<lp::Term> lower{{static_cast<int>(j), 1.0}};
      for (std::size_t k = 0; k < nk; ++k) {
        if (refs[k][j] == 0.0) continue;
        upper.push_back({w0 + static_cast<int>(k), -slopes.back() * refs[k][j]});
        lower.push_back({w0 + static_cast<int>(k), -slopes.front() * refs[k][j]});
      }
      prob.add_row(std::move(upper), lp::Sense::less_equal, 0.0);
      if (slopes.front() > 0.0) prob.add_row(std::move(lower), lp::Sense::greater_equal, 0.0);
    }
  } else {
    for (std::size_t k = 0; k < nk; ++k)
      prob.set_bounds(w0 + static_cast<int>(k), 1.0 / static_cast<double>(nk), 1.0 / static_cast<double>(nk));
  }
  const auto sol = lp::solve(prob);
  ViabilityReport rep;
  if (sol.status != lp::Status::optimal) return rep;
  rep.status = Viability::viable;
  Vec qv(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(n));
  for (double& q : qv) q = std::max(0.0, q);
  rep.q = poly.expand(qv);
  rep.mixture.assign(sol.x.begin() + w0, sol.x.begin() + w0 + static_cast<std::ptrdiff_t>(nk));
  return rep;
}

DualityReport duality_report(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                             const LossSpec& spec, std::optional<double> floor, const PrimalOptions& primal_options,
                             const PenalizedOptions& dual_options, const DualityTolerances& tol) {
  DualityReport rep(tree);
  rep.floor = floor;
  const double c = floor.value_or(kInfinity);
  rep.primal = accept_price_bounded(tree, pset, x, spec, c, primal_options);
  rep.dual = dual_price_bounded(tree, pset, x, spec, c, dual_options);

  const bool primal_nonviable = rep.primal.status == SolveStatus::nonviable;
  const bool dual_nonviable = rep.dual.status == SolveStatus::nonviable;
  rep.certificates.push_back(certify("viability_agreement", primal_nonviable == dual_nonviable, 0.0, 0.0));
  if (primal_nonviable || dual_nonviable) {
    rep.status = SolveStatus::nonviable;
    rep.gap = kInfinity;
    return rep;
  }
  if (rep.primal.status != SolveStatus::optimal || rep.dual.status != SolveStatus::optimal)
    rep.status = SolveStatus::iteration_limit;

  rep.gap = rep.primal.price - rep.dual.value;
  if (rep.dual.q.empty()) {
    rep.certificates.push_back(certify("dual_solved", false, 0.0, 0.0));
    return rep;
  }
  const double strong = spec.is_strict_cone() ? tol.lp : tol.strong;
  rep.certificates.push_back(certify("weak_duality", rep.gap >= -tol.weak, rep.gap, tol.weak));
  rep.certificates.push_back(certify("strong_duality", std::abs(rep.gap) <= strong, std::abs(rep.gap), strong));

  // Q is a probability on the support; without a floor it is a martingale.
  double mass = 0.0;
  double off_support = 0.0;
  for (std::size_t i = 0; i < rep.dual.q.size(); ++i) {
    mass += rep.dual.q[i];
    if (!pset.supported(tree.leaves()[i])) off_support += rep.dual.q[i];
  }
  rep.certificates.push_back(certify("dual_probability", std::abs(mass - 1.0) <= tol.martingale && off_support == 0.0,
                                     std::abs(mass - 1.0) + off_support, tol.martingale));
  if (!floor) {
    const double drift = martingale_residual(tree, rep.dual.q);
    rep.certificates.push_back(certify("dual_martingale", drift <= tol.martingale, drift, tol.martingale));
    // E_Q[gains(Z*)] vanishes for the primal hedge.
    const Vec g = node_gains(tree, rep.primal.strategy);
    double eg = 0.0;
    double scale = 1.0;
    for (std::size_t i = 0; i < rep.dual.q.size(); ++i) {
      eg += rep.dual.q[i] * g[tree.leaves()[i]];
      scale = std::max(scale, std::abs(g[tree.leaves()[i]]));
    }
    rep.certificates.push_back(
        certify("hedge_gains_zero_mean", std::abs(eg) <= tol.martingale * scale, std::abs(eg), tol.martingale * scale));
  }

  // Reported components add up; the penalty is the exact mixture penalty.
  const double recomposed = rep.dual.expectation - rep.dual.penalty - rep.dual.floor_cost;
  rep.certificates.push_back(certify("dual_value_consistent", std::abs(recomposed - rep.dual.value) <= 1e-7,
                                     std::abs(recomposed - rep.dual.value), 1e-7));
  if (!spec.is_strict_cone()) {
    const PenaltyResult pen = divergence_penalty(rep.dual.q, pset.leaf_probabilities(), spec);
    const double excess = pen.value - rep.dual.penalty;
    rep.certificates.push_back(certify("penalty_minimal", excess <= 1e-7 * std::max(1.0, std::abs(pen.value)) ||
                                                              (!std::isfinite(pen.value) && !std::isfinite(rep.dual.penalty)),
                                       excess, 1e-7));
  }

  // The primal hedge is acceptable at its price.
  const double risk = rep.primal.shortfall_risk;
  const double risk_tol = 1e-7 * std::max(1.0, std::abs(rep.primal.price));
  rep.certificates.push_back(certify("primal_acceptable", risk <= risk_tol, risk, risk_tol));
  if (floor) {
    const bool ok = admissible(tree, rep.primal.strategy, *floor + 1e-7 * std::max(1.0, *floor), pset.support());
    rep.certificates.push_back(certify("primal_admissible", ok, 0.0, 1e-7));
  }
  return rep;
}

}  // namespace robhedge
