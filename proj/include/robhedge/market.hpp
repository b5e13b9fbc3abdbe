#pragma once

// Discrete market: a finite non-recombining event tree with per-node asset
// prices, tree probability measures, adapted strategies and claims.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "robhedge/errors.hpp"

namespace robhedge {

using Vec = std::vector<double>;
using NodeMask = std::vector<bool>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kDefaultMartingaleTol = 1e-9;
inline constexpr double kProbabilityTol = 1e-12;

struct NodeSpec {
  int time = 0;
  Vec price;
  std::vector<int> children;
};

class ScenarioTree {
 public:
  // Validates wiring: one root at time 0, one parent per non-root node,
  // child time = parent time + 1, all leaves at the final step, finite prices.
  static ScenarioTree from_nodes(std::vector<NodeSpec> nodes);

  // One child per factor at every node; child price = parent price * factor
  // (componentwise). A factor of size 1 is broadcast over all assets.
  static ScenarioTree generate(const Vec& initial_price, const std::vector<Vec>& factors, int steps);

  std::size_t size() const noexcept { return time_.size(); }
  std::size_t assets() const noexcept { return assets_; }
  int steps() const noexcept { return steps_; }
  int root() const noexcept { return root_; }

  int time(int node) const { return time_.at(node); }
  int parent(int node) const { return parent_.at(node); }
  const std::vector<int>& children(int node) const { return children_.at(node); }
  bool is_leaf(int node) const { return children_.at(node).empty(); }
  std::span<const double> price(int node) const;
  // S(node) - S(parent(node)); zero vector at the root.
  std::span<const double> increment(int node) const;

  // Ascending node id.
  const std::vector<int>& leaves() const noexcept { return leaves_; }
  const std::vector<int>& internal_nodes() const noexcept { return internal_; }
  int leaf_index(int node) const { return leaf_index_.at(node); }
  int internal_index(int node) const { return internal_index_.at(node); }

  // Parents before children.
  const std::vector<int>& topological_order() const noexcept { return order_; }

  // Original node list, for serialization.
  std::vector<NodeSpec> node_specs() const;

 private:
  ScenarioTree() = default;
  void index();

  std::size_t assets_ = 0;
  int steps_ = 0;
  int root_ = 0;
  std::vector<int> time_;
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  Vec prices_;
  Vec increments_;
  std::vector<int> leaves_;
  std::vector<int> internal_;
  std::vector<int> leaf_index_;
  std::vector<int> internal_index_;
  std::vector<int> order_;
};

// Transition probabilities per internal node (indexed by internal_index).
class TreeMeasure {
 public:
  TreeMeasure(const ScenarioTree& tree, std::vector<Vec> transitions);

  // Same transition vector at every internal node; requires constant branching.
  static TreeMeasure homogeneous(const ScenarioTree& tree, const Vec& step);
  // Conditional transitions recovered from leaf probabilities. Unreached nodes
  // get uniform transitions.
  static TreeMeasure from_leaf_probabilities(const ScenarioTree& tree, std::span<const double> leaf_probs);

  const std::vector<Vec>& transitions() const noexcept { return transitions_; }
  const Vec& node_probabilities() const noexcept { return node_probs_; }
  const Vec& leaf_probabilities() const noexcept { return leaf_probs_; }
  std::size_t tree_size() const noexcept { return node_probs_.size(); }

 private:
  std::vector<Vec> transitions_;
  Vec node_probs_;
  Vec leaf_probs_;
};

class ReferenceMeasureSet {
 public:
  ReferenceMeasureSet(const ScenarioTree& tree, std::vector<TreeMeasure> measures);

  std::size_t size() const noexcept { return measures_.size(); }
  const TreeMeasure& operator[](std::size_t i) const { return measures_.at(i); }
  const std::vector<TreeMeasure>& measures() const noexcept { return measures_; }

  // Nodes charged by at least one member.
  const NodeMask& support() const noexcept { return support_; }
  bool supported(int node) const { return support_.at(node); }

  // Leaf probability vector of every member, in member order.
  const std::vector<Vec>& leaf_probabilities() const noexcept { return leaf_probs_; }

 private:
  std::vector<TreeMeasure> measures_;
  NodeMask support_;
  std::vector<Vec> leaf_probs_;
};

// Positions per internal node, `assets` entries each, laid out by internal_index.
class Strategy {
 public:
  explicit Strategy(const ScenarioTree& tree);
  Strategy(const ScenarioTree& tree, Vec positions);

  std::span<const double> at(int internal_idx) const;
  std::span<double> at(int internal_idx);
  const Vec& positions() const noexcept { return positions_; }
  std::size_t assets() const noexcept { return assets_; }

 private:
  std::size_t assets_;
  Vec positions_;
};

// Payoff per leaf, ordered as ScenarioTree::leaves().
struct Claim {
  Vec payoff;

  static Claim constant(const ScenarioTree& tree, double value);
  static Claim call(const ScenarioTree& tree, double strike, std::size_t asset = 0);
  static Claim put(const ScenarioTree& tree, double strike, std::size_t asset = 0);
};

double gains(const ScenarioTree& tree, const Strategy& strategy, int node);
// Gains at every node in one pass.
Vec node_gains(const ScenarioTree& tree, const Strategy& strategy);

// gains >= -floor at every supported node (every node when support is empty).
// floor may be +infinity.
bool admissible(const ScenarioTree& tree, const Strategy& strategy, double floor,
                const NodeMask& support = {});

// Conditional one-step drift within tol * max(1, |S(node)|) per asset at every
// internal node reached with positive probability.
bool is_martingale_measure(const ScenarioTree& tree, const TreeMeasure& measure,
                           double tol = kDefaultMartingaleTol);

// dQ/dP per leaf; +infinity where Q charges a P-null leaf, 0 where both vanish.
Vec density(const TreeMeasure& q, const TreeMeasure& p);
Vec density(std::span<const double> q_leaf, std::span<const double> p_leaf);

}  // namespace robhedge
