#pragma once

// Primal hedging programs: superhedging price phi, acceptance price psi and
// its bounded-admissibility variant psi^c.

#include <vector>

#include "robhedge/loss.hpp"
#include "robhedge/market.hpp"
#include "robhedge/status.hpp"

namespace robhedge {

// Smooth losses use a log-barrier Newton method; the LP formulations ignore
// these options.
struct PrimalOptions {
  // Barrier duality gap, relative to max(1, max |payoff|).
  double tolerance = 1e-10;
  int max_iterations = 5000;  // Newton steps
};

struct PrimalSolution {
  explicit PrimalSolution(const ScenarioTree& tree) : strategy(tree) {}

  SolveStatus status = SolveStatus::optimal;
  double price = 0.0;
  Strategy strategy;
  // price + gains(strategy) - X per leaf.
  Vec shortfall;
  // Robust OCE of the shortfall (strict cone: -min over supported leaves).
  double shortfall_risk = 0.0;
  // Certified lower bound; equals price for the LP formulations.
  double lower_bound = 0.0;
  int iterations = 0;  // simplex pivots plus Newton steps
};

// min m s.t. m + gains(Z) >= X on supported leaves (and gains >= -floor on
// supported nodes when floor is finite).
PrimalSolution superhedge_price(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                                double floor = kInfinity);

// min m s.t. robust_oce(m + gains(Z) - X) <= 0. strict_cone delegates to
// superhedge_price.
PrimalSolution accept_price(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                            const LossSpec& spec, const PrimalOptions& options = {});

// accept_price with gains(Z) >= -floor at every supported node.
PrimalSolution accept_price_bounded(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                                    const LossSpec& spec, double floor, const PrimalOptions& options = {});

// Strategy grid in gains units: coordinate (node, asset) takes values
// k * step / s and spans [-radius / s, radius / s], with s the largest
// one-step price move of that asset at that node.
struct StrategyGrid {
  double step = 0.5;
  double radius = 40.0;
  // Each round re-centers on the best point with half-width 2 steps and
  // divides the step by refine_factor.
  double refine_factor = 10.0;
  int rounds = 2;
};

struct InfconvReport {
  double grid_value = kInfinity;
  double psi_c = 0.0;
  double difference = kInfinity;
  double final_step = 0.0;
  long long points = 0;
  // False when the best point of the first grid sits on its boundary.
  bool bracketed = true;
  Vec best;
};

// min over admissible grid strategies of rho(gains(Z) - X), against
// accept_price_bounded. At most 3 strategy coordinates.
InfconvReport infconv_check(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                            const LossSpec& spec, double floor, const StrategyGrid& grid = {});

}  // namespace robhedge
