#pragma once

// Brute-force verifiers. They share no code with the production solvers:
// losses, OCEs and linear algebra are re-implemented naively here.

#include <span>
#include <vector>

#include "robhedge/loss.hpp"
#include "robhedge/market.hpp"

namespace robhedge::oracle {

struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;
};

// Grid over (m, Z). Strategy axes are in gains units by default: coordinate
// (node, asset) moves by step / s, s being the largest one-step price move of
// that asset at that node. Each refinement round re-centers on the best
// point, keeps 2 steps either side and divides the steps by refine_factor.
struct GridSpec {
  double z_step = 0.5;
  double z_radius = 40.0;
  // Explicit strategy axes override z_step / z_radius, one per coordinate.
  std::vector<GridAxis> z_axes;
  // Price grid step; the price is the smallest grid m that is acceptable.
  double m_step = 1e-4;
  double refine_factor = 10.0;
  int rounds = 2;
  long long max_points = 10000000;
};

struct BruteForceResult {
  double price = kInfinity;
  // Positions per strategy coordinate, in strategy layout.
  Vec positions;
  double final_z_step = 0.0;
  long long points = 0;
};

// min over the grid of m such that m + gains(Z) - X is acceptable (and
// gains >= -floor on supported nodes). At most 3 strategy coordinates.
BruteForceResult brute_force_primal(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                                    const LossSpec& spec, const GridSpec& grid = {}, double floor = kInfinity);

// Robust OCE by a naive scan and golden refinement; independent of risk.cpp.
double naive_robust_oce(const std::vector<Vec>& probs, std::span<const double> y, const LossSpec& spec);

// Average of the worst alpha-tail of the loss -X under P.
double cvar_sorted(std::span<const double> probs, std::span<const double> x, double alpha);

struct Vertex {
  Vec leaf_probabilities;  // tree.leaves() order
  TreeMeasure measure;
};

// All basic feasible solutions of the martingale system on the supported
// leaves. Throws ModelError when the polytope dimension exceeds 12 or the
// number of candidate bases exceeds max_bases.
std::vector<Vertex> enumerate_martingale_vertices(const ScenarioTree& tree, const NodeMask& support,
                                                  long long max_bases = 5000000);

}  // namespace robhedge::oracle
