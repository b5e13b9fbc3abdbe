#pragma once

// Fixtures and random instance generators shared by the unit and acceptance
// tests.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "robhedge/dual.hpp"
#include "robhedge/loss.hpp"
#include "robhedge/market.hpp"

namespace testing {

using namespace robhedge;

inline ScenarioTree binomial(int steps = 1) { return ScenarioTree::generate({100.0}, {{1.2}, {0.8}}, steps); }
inline ScenarioTree trinomial(int steps = 1) { return ScenarioTree::generate({100.0}, {{1.2}, {1.0}, {0.8}}, steps); }

inline ReferenceMeasureSet single(const ScenarioTree& tree, const Vec& step) {
  return ReferenceMeasureSet(tree, {TreeMeasure::homogeneous(tree, step)});
}

inline Vec uniform_step(std::size_t n) { return Vec(n, 1.0 / static_cast<double>(n)); }

inline double expectation(const Vec& q, const Vec& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q[i] * x[i];
  return s;
}

struct Instance {
  ScenarioTree tree;
  ReferenceMeasureSet pset;
  Claim claim;
  LossSpec spec;
  std::string label;
};

inline LossSpec spec_by_index(int i) {
  switch (i % 6) {
    case 0: return LossSpec::cvar(0.5);
    case 1: return LossSpec::cvar(0.8);
    case 2: return LossSpec::cvar(0.9);
    case 3: return LossSpec::power(3.0);
    case 4: return LossSpec::entropic();
    default: return LossSpec::strict_cone();
  }
}

// Random tree with up to max_steps steps and 2..max_branch branches, factors
// straddling 1 so martingale measures exist; up to max_measures transition
// assignments, some with zero branches.
class InstanceGenerator {
 public:
  explicit InstanceGenerator(unsigned seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::mt19937_64& rng() { return rng_; }

  ScenarioTree tree(int max_steps = 3, int max_branch = 3) {
    const int steps = integer(1, max_steps);
    const int br = integer(2, max_branch);
    std::vector<Vec> f;
    for (int b = 0; b < br; ++b) f.push_back({0.7 + 0.6 * b / (br - 1) + 0.05 * uniform(0.0, 1.0)});
    std::reverse(f.begin(), f.end());
    return ScenarioTree::generate({100.0}, f, steps);
  }

  ReferenceMeasureSet measures(const ScenarioTree& tree, int max_measures = 3, double zero_prob = 0.15) {
    const int k = integer(1, max_measures);
    std::vector<TreeMeasure> ms;
    for (int j = 0; j < k; ++j) {
      std::vector<Vec> tr;
      for (int node : tree.internal_nodes()) {
        Vec p(tree.children(node).size());
        double s = 0.0;
        for (double& v : p) {
          v = uniform(0.0, 1.0) < zero_prob ? 0.0 : 0.05 + uniform(0.0, 1.0);
          s += v;
        }
        if (s == 0.0) {
          p[0] = 1.0;
          s = 1.0;
        }
        for (double& v : p) v /= s;
        tr.push_back(std::move(p));
      }
      ms.emplace_back(tree, std::move(tr));
    }
    return ReferenceMeasureSet(tree, std::move(ms));
  }

  Claim claim(const ScenarioTree& tree) {
    switch (integer(0, 2)) {
      case 0: return Claim::call(tree, uniform(80.0, 120.0));
      case 1: return Claim::put(tree, uniform(80.0, 120.0));
      default: {
        Claim c;
        for (std::size_t i = 0; i < tree.leaves().size(); ++i) c.payoff.push_back(uniform(-10.0, 30.0));
        return c;
      }
    }
  }

  Vec outcomes(std::size_t n, double lo = -5.0, double hi = 5.0) {
    Vec x(n);
    for (double& v : x) v = uniform(lo, hi);
    return x;
  }

  Vec distribution(std::size_t n) {
    Vec p(n);
    double s = 0.0;
    for (double& v : p) {
      v = 0.05 + uniform(0.0, 1.0);
      s += v;
    }
    for (double& v : p) v /= s;
    return p;
  }

  // Viable instance (by the dual viability LP) with the given spec.
  Instance viable(const LossSpec& spec, int max_steps = 3, int max_branch = 3, int max_measures = 3) {
    for (;;) {
      auto t = tree(max_steps, max_branch);
      auto p = measures(t, max_measures);
      if (viability_check(t, p, spec).status != Viability::viable) continue;
      auto c = claim(t);
      return {std::move(t), std::move(p), std::move(c), spec, spec.name()};
    }
  }

 private:
  std::mt19937_64 rng_;
};

// Number of strategy coordinates on supported internal nodes with a nonzero move.
inline int strategy_coordinates(const ScenarioTree& tree, const ReferenceMeasureSet& pset) {
  int n = 0;
  for (int v : tree.internal_nodes()) {
    if (!pset.supported(v)) continue;
    for (std::size_t j = 0; j < tree.assets(); ++j) {
      double s = 0.0;
      for (int c : tree.children(v)) s = std::max(s, std::abs(tree.increment(c)[j]));
      if (s > 0.0) ++n;
    }
  }
  return n;
}

}  // namespace testing
