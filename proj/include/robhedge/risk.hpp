#pragma once

// Optimized certainty equivalents (classical and robust), acceptance queries,
// divergence penalties and the dual OCE representation.

#include <span>
#include <vector>

#include "robhedge/loss.hpp"
#include "robhedge/market.hpp"

namespace robhedge {

inline constexpr double kAcceptanceTol = 1e-9;

struct RiskResult {
  double value = 0.0;
  // Minimizing shift m in  inf_m max_P E_P[l(m - X)] - m.
  double m_star = 0.0;
  // Reference measure attaining the inner max at m_star.
  int worst = 0;
};

// Distribution-level API: probabilities and outcomes are parallel vectors.
// Outcomes with zero probability are ignored (they may be non-finite).
RiskResult oce(std::span<const double> probs, std::span<const double> x, const LossSpec& spec);
RiskResult robust_oce(const std::vector<Vec>& probs, std::span<const double> x, const LossSpec& spec);

// Tree-level API: X is a per-leaf claim.
RiskResult oce(const TreeMeasure& p, const Claim& x, const LossSpec& spec);
RiskResult robust_oce(const ReferenceMeasureSet& pset, const Claim& x, const LossSpec& spec);

// Strict cone: X >= 0 on the support. Otherwise robust OCE <= kAcceptanceTol.
bool is_acceptable(const std::vector<Vec>& probs, std::span<const double> x, const LossSpec& spec);
bool is_acceptable(const ReferenceMeasureSet& pset, std::span<const double> x, const LossSpec& spec);

// E_P[l*(dQ/dP)] for one reference measure; +infinity if Q is not << P.
double reference_penalty(std::span<const double> q, std::span<const double> p, const LossSpec& spec);
// Minimum of reference_penalty over the listed measures.
double member_penalty(std::span<const double> q, const std::vector<Vec>& probs, const LossSpec& spec);

struct PenaltyResult {
  double value = kInfinity;
  // Weights of the minimizing mixture of the reference measures.
  Vec mixture;
};

// Conjugate of the robust OCE at -Q: inf over mixtures P of the reference
// measures of E_P[l*(dQ/dP)]. Equals member_penalty for one measure.
PenaltyResult divergence_penalty(std::span<const double> q, const std::vector<Vec>& probs, const LossSpec& spec);
PenaltyResult divergence_penalty(const TreeMeasure& q, const ReferenceMeasureSet& pset, const LossSpec& spec);

struct DualOceResult {
  double value = 0.0;
  Vec q;
  Vec mixture;
  double penalty = 0.0;
  int iterations = 0;
};

// sup_Q E_Q[-X] - divergence_penalty(Q).
DualOceResult dual_oce(const std::vector<Vec>& probs, std::span<const double> x, const LossSpec& spec);
DualOceResult dual_oce(const ReferenceMeasureSet& pset, const Claim& x, const LossSpec& spec);

}  // namespace robhedge
