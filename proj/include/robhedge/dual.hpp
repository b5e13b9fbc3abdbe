#pragma once

// Dual programs over martingale measures: the superhedging dual, the
// penalized dual of the acceptance price, viability and duality reports.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robhedge/loss.hpp"
#include "robhedge/market.hpp"
#include "robhedge/penalized.hpp"
#include "robhedge/primal.hpp"
#include "robhedge/status.hpp"

namespace robhedge {

// Martingale measures in leaf layout. The variables are the probabilities of
// the supported leaves; rows are the normalization followed by one
// conditional-mean-zero row per (supported internal node, asset).
struct MartingalePolytope {
  // Variable j is the leaf tree.leaves()[leaves[j]].
  std::vector<int> leaves;
  EqualitySystem system;
  NodeMask support;
  std::size_t num_leaves = 0;

  std::size_t variables() const noexcept { return leaves.size(); }
  std::size_t equations() const noexcept { return system.rows.size(); }
  // Per-leaf vector (tree.leaves() order) from a variable vector.
  Vec expand(std::span<const double> x) const;
  // Variable vector from a per-leaf vector.
  Vec restrict(std::span<const double> leaf_values) const;
};

MartingalePolytope build_polytope(const ScenarioTree& tree, const ReferenceMeasureSet& pset);

struct DualSolution {
  SolveStatus status = SolveStatus::nonviable;
  double value = -kInfinity;
  // Optimal Q per leaf, tree.leaves() order.
  Vec q;
  // Weights of the reference mixture attaining the penalty.
  Vec mixture;
  // Index of the largest mixture weight.
  int reference = 0;
  double expectation = 0.0;  // E_Q[X]
  double penalty = 0.0;
  // Bounded variant: floor * total node multiplier. Node multipliers price
  // the constraint gains >= -floor; they are indexed by node.
  double floor_cost = 0.0;
  Vec node_multipliers;
  int iterations = 0;
};

// max E_Q[X] over the martingale polytope; with a finite floor, over the
// Lagrangian dual of the floor constraints. Infeasible -> nonviable.
DualSolution superhedge_dual(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                             double floor = kInfinity);

// sup_Q E_Q[X] - divergence_penalty(Q) over martingale Q. strict_cone
// delegates to superhedge_dual.
DualSolution dual_price(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                        const LossSpec& spec, const PenalizedOptions& options = {});

// Dual of accept_price_bounded: sup over (Q, node multipliers mu >= 0) of
// E_Q[X] - divergence_penalty(Q) - floor * sum(mu), where E_Q[gains] +
// sum_n mu_n gains(n) vanishes for every strategy.
DualSolution dual_price_bounded(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                                const LossSpec& spec, double floor, const PenalizedOptions& options = {});

enum class Viability { viable, nonviable };

inline const char* to_string(Viability v) noexcept { return v == Viability::viable ? "viable" : "nonviable"; }

struct ViabilityReport {
  Viability status = Viability::nonviable;
  // A martingale measure with finite penalty, and its mixture weights.
  Vec q;
  Vec mixture;
};

// Viable iff some martingale Q has finite divergence penalty (strict_cone:
// iff the martingale polytope is nonempty). Decided by one LP.
ViabilityReport viability_check(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const LossSpec& spec);

struct Certificate {
  std::string name;
  bool passed = false;
  double value = 0.0;  // measured residual or quantity
  double tolerance = 0.0;
};

struct DualityTolerances {
  double weak = 1e-6;    // gap >= -weak
  double strong = 1e-4;  // |gap| <= strong
  double lp = 1e-7;      // |gap| for pure LP formulations
  double martingale = 1e-8;
};

struct DualityReport {
  explicit DualityReport(const ScenarioTree& tree) : primal(tree) {}

  SolveStatus status = SolveStatus::optimal;
  PrimalSolution primal;
  DualSolution dual;
  std::optional<double> floor;
  // primal.price - dual.value.
  double gap = 0.0;
  std::vector<Certificate> certificates;

  bool all_pass() const noexcept {
    for (const auto& c : certificates)
      if (!c.passed) return false;
    return true;
  }
};

DualityReport duality_report(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                             const LossSpec& spec, std::optional<double> floor = std::nullopt,
                             const PrimalOptions& primal_options = {}, const PenalizedOptions& dual_options = {},
                             const DualityTolerances& tolerances = {});

}  // namespace robhedge
