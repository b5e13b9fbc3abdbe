#include "robhedge/market.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

namespace robhedge {

namespace {

std::string node_label(int node) { return "node " + std::to_string(node); }

}  // namespace

ScenarioTree ScenarioTree::from_nodes(std::vector<NodeSpec> nodes) {
  if (nodes.empty()) throw ModelError("tree has no nodes");
  ScenarioTree tree;
  const int n = static_cast<int>(nodes.size());
  tree.assets_ = nodes.front().price.size();
  if (tree.assets_ == 0) throw ModelError("node 0: price vector is empty");

  tree.time_.resize(n);
  tree.parent_.assign(n, -1);
  tree.children_.resize(n);
  tree.prices_.resize(static_cast<std::size_t>(n) * tree.assets_);
  for (int i = 0; i < n; ++i) {
    auto& spec = nodes[i];
    if (spec.price.size() != tree.assets_)
      throw ModelError(node_label(i) + ": expected " + std::to_string(tree.assets_) + " prices");
    for (double s : spec.price)
      if (!std::isfinite(s)) throw ModelError(node_label(i) + ": price is not finite");
    std::copy(spec.price.begin(), spec.price.end(), tree.prices_.begin() + i * tree.assets_);
    tree.time_[i] = spec.time;
    tree.children_[i] = spec.children;
  }
  for (int i = 0; i < n; ++i) {
    for (int c : tree.children_[i]) {
      if (c < 0 || c >= n) throw ModelError(node_label(i) + ": child index " + std::to_string(c) + " out of range");
      if (c == i) throw ModelError(node_label(i) + ": node lists itself as a child");
      if (tree.parent_[c] != -1) throw ModelError(node_label(c) + ": has more than one parent");
      if (tree.time_[c] != tree.time_[i] + 1)
        throw ModelError(node_label(c) + ": child time must equal parent time + 1");
      tree.parent_[c] = i;
    }
  }
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    if (tree.parent_[i] == -1) {
      ++roots;
      tree.root_ = i;
    }
  }
  if (roots != 1) throw ModelError("tree must have exactly one root, found " + std::to_string(roots));
  if (tree.time_[tree.root_] != 0) throw ModelError("root must be at time 0");
  tree.index();
  return tree;
}

ScenarioTree ScenarioTree::generate(const Vec& initial_price, const std::vector<Vec>& factors, int steps) {
  if (initial_price.empty()) throw ModelError("initial price is empty");
  if (factors.empty()) throw ModelError("factor set is empty");
  if (steps < 1) throw ModelError("steps must be >= 1");
  const std::size_t d = initial_price.size();
  for (const auto& f : factors) {
    if (f.size() != 1 && f.size() != d) throw ModelError("factor dimension does not match the price dimension");
    for (double x : f)
      if (!(x > 0.0) || !std::isfinite(x)) throw ModelError("factors must be finite and > 0");
  }
  std::vector<NodeSpec> nodes;
  nodes.push_back({0, initial_price, {}});
  std::size_t level_begin = 0;
  for (int t = 0; t < steps; ++t) {
    const std::size_t level_end = nodes.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      for (const auto& f : factors) {
        NodeSpec child{t + 1, nodes[i].price, {}};
        for (std::size_t j = 0; j < d; ++j) child.price[j] *= f.size() == 1 ? f[0] : f[j];
        nodes[i].children.push_back(static_cast<int>(nodes.size()));
        nodes.push_back(std::move(child));
      }
    }
    level_begin = level_end;
  }
  return from_nodes(std::move(nodes));
}

void ScenarioTree::index() {
  const int n = static_cast<int>(size());
  order_.clear();
  order_.reserve(n);
  std::deque<int> queue{root_};
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    order_.push_back(v);
    for (int c : children_[v]) queue.push_back(c);
  }
  if (static_cast<int>(order_.size()) != n) throw ModelError("tree is not connected");

  steps_ = 0;
  for (int i = 0; i < n; ++i)
    if (children_[i].empty()) steps_ = std::max(steps_, time_[i]);
  leaf_index_.assign(n, -1);
  internal_index_.assign(n, -1);
  leaves_.clear();
  internal_.clear();
  for (int i = 0; i < n; ++i) {
    if (children_[i].empty()) {
      if (time_[i] != steps_) throw ModelError(node_label(i) + ": leaf is not at the final time step");
      leaf_index_[i] = static_cast<int>(leaves_.size());
      leaves_.push_back(i);
    } else {
      internal_index_[i] = static_cast<int>(internal_.size());
      internal_.push_back(i);
    }
  }
  if (steps_ < 1) throw ModelError("tree must have at least one step");

  increments_.assign(prices_.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    if (parent_[i] < 0) continue;
    for (std::size_t j = 0; j < assets_; ++j)
      increments_[i * assets_ + j] = prices_[i * assets_ + j] - prices_[parent_[i] * assets_ + j];
  }
}

std::span<const double> ScenarioTree::price(int node) const {
  if (node < 0 || node >= static_cast<int>(size())) throw ModelError("node index out of range");
  return {prices_.data() + static_cast<std::size_t>(node) * assets_, assets_};
}

std::span<const double> ScenarioTree::increment(int node) const {
  if (node < 0 || node >= static_cast<int>(size())) throw ModelError("node index out of range");
  return {increments_.data() + static_cast<std::size_t>(node) * assets_, assets_};
}

std::vector<NodeSpec> ScenarioTree::node_specs() const {
  std::vector<NodeSpec> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto p = price(static_cast<int>(i));
    out[i] = {time_[i], Vec(p.begin(), p.end()), children_[i]};
  }
  return out;
}

// ---------------------------------------------------------------------------

TreeMeasure::TreeMeasure(const ScenarioTree& tree, std::vector<Vec> transitions)
    : transitions_(std::move(transitions)) {
  const auto& internal = tree.internal_nodes();
  if (transitions_.size() != internal.size())
    throw ModelError("measure has " + std::to_string(transitions_.size()) + " transition vectors, tree has " +
                     std::to_string(internal.size()) + " internal nodes");
  for (std::size_t k = 0; k < internal.size(); ++k) {
    const int node = internal[k];
    const auto& q = transitions_[k];
    if (q.size() != tree.children(node).size())
      throw ModelError(node_label(node) + ": transition has " + std::to_string(q.size()) + " entries, node has " +
                       std::to_string(tree.children(node).size()) + " children");
    double sum = 0.0;
    for (double x : q) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw ModelError(node_label(node) + ": negative or non-finite probability");
      sum += x;
    }
    if (std::abs(sum - 1.0) > kProbabilityTol) throw ModelError(node_label(node) + ": transition does not sum to 1");
  }
  node_probs_.assign(tree.size(), 0.0);
  node_probs_[tree.root()] = 1.0;
  for (int v : tree.topological_order()) {
    if (tree.is_leaf(v)) continue;
    const auto& q = transitions_[tree.internal_index(v)];
    const auto& ch = tree.children(v);
    for (std::size_t c = 0; c < ch.size(); ++c) node_probs_[ch[c]] = node_probs_[v] * q[c];
  }
  leaf_probs_.reserve(tree.leaves().size());
  for (int leaf : tree.leaves()) leaf_probs_.push_back(node_probs_[leaf]);
}

TreeMeasure TreeMeasure::homogeneous(const ScenarioTree& tree, const Vec& step) {
  std::vector<Vec> tr;
  tr.reserve(tree.internal_nodes().size());
  for (int node : tree.internal_nodes()) {
    if (tree.children(node).size() != step.size())
      throw ModelError(node_label(node) + ": has " + std::to_string(tree.children(node).size()) +
                       " children but the step vector has " + std::to_string(step.size()) + " entries");
    tr.push_back(step);
  }
  return TreeMeasure(tree, std::move(tr));
}

TreeMeasure TreeMeasure::from_leaf_probabilities(const ScenarioTree& tree, std::span<const double> leaf_probs) {
  if (leaf_probs.size() != tree.leaves().size()) throw ModelError("leaf probability vector has the wrong length");
  Vec mass(tree.size(), 0.0);
  for (std::size_t i = 0; i < leaf_probs.size(); ++i) mass[tree.leaves()[i]] = std::max(0.0, leaf_probs[i]);
  const auto& order = tree.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (int c : tree.children(*it)) mass[*it] += mass[c];
  std::vector<Vec> tr;
  for (int node : tree.internal_nodes()) {
    const auto& ch = tree.children(node);
    Vec q(ch.size(), 1.0 / static_cast<double>(ch.size()));
    if (mass[node] > 0.0) {
      for (std::size_t c = 0; c < ch.size(); ++c) q[c] = mass[ch[c]] / mass[node];
      // Renormalize rounding so the constructor's sum check holds.
      const double s = std::accumulate(q.begin(), q.end(), 0.0);
      for (double& x : q) x /= s;
    }
    tr.push_back(std::move(q));
  }
  return TreeMeasure(tree, std::move(tr));
}

ReferenceMeasureSet::ReferenceMeasureSet(const ScenarioTree& tree, std::vector<TreeMeasure> measures)
    : measures_(std::move(measures)) {
  if (measures_.empty()) throw ModelError("reference measure set is empty");
  support_.assign(tree.size(), false);
  for (const auto& m : measures_) {
    if (m.tree_size() != tree.size()) throw ModelError("reference measure defined on a different tree");
    for (std::size_t i = 0; i < tree.size(); ++i)
      if (m.node_probabilities()[i] > 0.0) support_[i] = true;
    leaf_probs_.push_back(m.leaf_probabilities());
  }
}

// ---------------------------------------------------------------------------

Strategy::Strategy(const ScenarioTree& tree)
    : assets_(tree.assets()), positions_(tree.internal_nodes().size() * tree.assets(), 0.0) {}

Strategy::Strategy(const ScenarioTree& tree, Vec positions) : assets_(tree.assets()), positions_(std::move(positions)) {
  if (positions_.size() != tree.internal_nodes().size() * assets_)
    throw ModelError("strategy must have one position per internal node and asset");
}

std::span<const double> Strategy::at(int internal_idx) const {
  return {positions_.data() + static_cast<std::size_t>(internal_idx) * assets_, assets_};
}

std::span<double> Strategy::at(int internal_idx) {
  return {positions_.data() + static_cast<std::size_t>(internal_idx) * assets_, assets_};
}

Claim Claim::constant(const ScenarioTree& tree, double value) { return {Vec(tree.leaves().size(), value)}; }

Claim Claim::call(const ScenarioTree& tree, double strike, std::size_t asset) {
  if (asset >= tree.assets()) throw ModelError("claim asset index out of range");
  Claim c;
  for (int leaf : tree.leaves()) c.payoff.push_back(std::max(tree.price(leaf)[asset] - strike, 0.0));
  return c;
}

Claim Claim::put(const ScenarioTree& tree, double strike, std::size_t asset) {
  if (asset >= tree.assets()) throw ModelError("claim asset index out of range");
  Claim c;
  for (int leaf : tree.leaves()) c.payoff.push_back(std::max(strike - tree.price(leaf)[asset], 0.0));
  return c;
}

// ---------------------------------------------------------------------------

Vec node_gains(const ScenarioTree& tree, const Strategy& strategy) {
  Vec g(tree.size(), 0.0);
  for (int v : tree.topological_order()) {
    if (tree.is_leaf(v)) continue;
    const auto z = strategy.at(tree.internal_index(v));
    for (int c : tree.children(v)) {
      const auto ds = tree.increment(c);
      double step = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) step += z[j] * ds[j];
      g[c] = g[v] + step;
    }
  }
  return g;
}

double gains(const ScenarioTree& tree, const Strategy& strategy, int node) {
  if (node < 0 || node >= static_cast<int>(tree.size())) throw ModelError("node index out of range");
  double total = 0.0;
  for (int v = node; tree.parent(v) >= 0; v = tree.parent(v)) {
    const auto z = strategy.at(tree.internal_index(tree.parent(v)));
    const auto ds = tree.increment(v);
    for (std::size_t j = 0; j < z.size(); ++j) total += z[j] * ds[j];
  }
  return total;
}

bool admissible(const ScenarioTree& tree, const Strategy& strategy, double floor, const NodeMask& support) {
  if (std::isinf(floor)) return true;
  const Vec g = node_gains(tree, strategy);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!support.empty() && !support[i]) continue;
    if (g[i] < -floor) return false;
  }
  return true;
}

bool is_martingale_measure(const ScenarioTree& tree, const TreeMeasure& measure, double tol) {
  if (measure.tree_size() != tree.size()) throw ModelError("measure defined on a different tree");
  for (int node : tree.internal_nodes()) {
    if (!(measure.node_probabilities()[node] > 0.0)) continue;
    const auto& q = measure.transitions()[tree.internal_index(node)];
    const auto& ch = tree.children(node);
    const auto s = tree.price(node);
    for (std::size_t j = 0; j < tree.assets(); ++j) {
      double drift = 0.0;
      for (std::size_t c = 0; c < ch.size(); ++c) drift += q[c] * tree.increment(ch[c])[j];
      if (std::abs(drift) > tol * std::max(1.0, std::abs(s[j]))) return false;
    }
  }
  return true;
}

Vec density(std::span<const double> q_leaf, std::span<const double> p_leaf) {
  if (q_leaf.size() != p_leaf.size()) throw ModelError("density: measures live on different trees");
  Vec out(q_leaf.size());
  for (std::size_t i = 0; i < q_leaf.size(); ++i) {
    if (p_leaf[i] > 0.0) out[i] = q_leaf[i] / p_leaf[i];
    else out[i] = q_leaf[i] > 0.0 ? kInfinity : 0.0;
  }
  return out;
}

Vec density(const TreeMeasure& q, const TreeMeasure& p) { return density(q.leaf_probabilities(), p.leaf_probabilities()); }

}  // namespace robhedge
