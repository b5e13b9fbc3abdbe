#include "robhedge/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace robhedge::oracle {

namespace {

double loss(const LossSpec& spec, double x) {
  switch (spec.kind()) {
    case LossKind::power: return x > 0.0 ? std::pow(x, spec.p()) / spec.p() : 0.0;
    case LossKind::cvar: return x > 0.0 ? x / spec.alpha() : 0.0;
    case LossKind::entropic: return std::exp(x) - 1.0;
    case LossKind::piecewise_linear: {
      // Integral of the slope function from 0 to x.
      const auto& b = spec.breakpoints();
      const auto& s = spec.slopes();
      auto slope_at = [&](double t) {
        std::size_t i = 0;
        while (i < b.size() && t >= b[i]) ++i;
        return s[i];
      };
      double lo = std::min(0.0, x);
      double hi = std::max(0.0, x);
      double total = 0.0;
      double a = lo;
      for (double k : b) {
        if (k <= a || k >= hi) continue;
        total += slope_at(0.5 * (a + k)) * (k - a);
        a = k;
      }
      total += slope_at(0.5 * (a + hi)) * (hi - a);
      return x >= 0.0 ? total : -total;
    }
    case LossKind::strict_cone: break;
  }
  throw ModelError("oracle: strict_cone has no loss function");
}

double objective(const std::vector<Vec>& probs, std::span<const double> y, const LossSpec& spec, double s) {
  double worst = -kInfinity;
  for (const auto& p : probs) {
    double e = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (p[i] > 0.0) e += p[i] * loss(spec, s - y[i]);
    worst = std::max(worst, e);
  }
  return worst - s;
}

// Per-node gains of the strategy given by positions[internal_index * d + j].
Vec walk_gains(const ScenarioTree& tree, const Vec& positions) {
  const std::size_t d = tree.assets();
  Vec g(tree.size(), 0.0);
  for (int v : tree.topological_order()) {
    if (tree.is_leaf(v)) continue;
    const std::size_t base = static_cast<std::size_t>(tree.internal_index(v)) * d;
    for (int c : tree.children(v)) {
      double inc = 0.0;
      for (std::size_t j = 0; j < d; ++j) inc += positions[base + j] * (tree.price(c)[j] - tree.price(v)[j]);
      g[c] = g[v] + inc;
    }
  }
  return g;
}

struct Axis {
  std::size_t index;
  double lo;
  double hi;
  double step;
};

// Solves a square system by Gaussian elimination with partial pivoting.
// Returns false when a pivot falls below tol.
bool solve_square(std::vector<Vec> a, Vec b, Vec& x, double tol) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < tol) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return true;
}

}  // namespace

double naive_robust_oce(const std::vector<Vec>& probs, std::span<const double> y, const LossSpec& spec) {
  double lo = kInfinity;
  double hi = -kInfinity;
  for (const auto& p : probs)
    for (std::size_t i = 0; i < y.size(); ++i)
      if (p[i] > 0.0) {
        lo = std::min(lo, y[i]);
        hi = std::max(hi, y[i]);
      }
  if (spec.is_strict_cone()) return -lo;
  // The objective is convex in s and its minimizer sits where the slope of
  // l crosses 1, inside the padded outcome range: plain golden section.
  const double pad = 10.0 + 0.1 * (hi - lo);
  double a = lo - pad;
  double b = hi + pad;
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = objective(probs, y, spec, c);
  double fd = objective(probs, y, spec, d);
  for (int it = 0; it < 160 && b - a > 1e-13 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = objective(probs, y, spec, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = objective(probs, y, spec, d);
    }
  }
  return std::min(fc, fd);
}

double cvar_sorted(std::span<const double> probs, std::span<const double> x, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ModelError("cvar_sorted: alpha must lie in (0, 1)");
  if (probs.size() != x.size()) throw ModelError("cvar_sorted: probability and outcome sizes differ");
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (probs[i] > 0.0) order.push_back(i);
  // Largest loss -X first.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  double taken = 0.0;
  double sum = 0.0;
  for (std::size_t i : order) {
    const double w = std::min(probs[i], alpha - taken);
    if (w <= 0.0) break;
    sum += w * -x[i];
    taken += w;
  }
  return sum / alpha;
}

BruteForceResult brute_force_primal(const ScenarioTree& tree, const ReferenceMeasureSet& pset, const Claim& x,
                                    const LossSpec& spec, const GridSpec& grid, double floor) {
  if (x.payoff.size() != tree.leaves().size()) throw ModelError("oracle: claim needs one payoff per leaf");
  if (!(grid.m_step > 0.0) || !(grid.refine_factor > 1.0) || grid.rounds < 0)
    throw ModelError("oracle: invalid grid");
  const std::size_t d = tree.assets();
  std::vector<Axis> axes;
  for (int v : tree.internal_nodes()) {
    if (!pset.supported(v)) continue;
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (int c : tree.children(v))
        if (pset.supported(c)) s = std::max(s, std::abs(tree.price(c)[j] - tree.price(v)[j]));
      if (s > 0.0)
        axes.push_back({static_cast<std::size_t>(tree.internal_index(v)) * d + j, -grid.z_radius / s,
                        grid.z_radius / s, grid.z_step / s});
    }
  }
  if (axes.size() > 3) throw ModelError("oracle: brute force supports at most 3 strategy coordinates");
  if (!grid.z_axes.empty()) {
    if (grid.z_axes.size() != axes.size()) throw ModelError("oracle: one grid axis per strategy coordinate");
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const auto& g = grid.z_axes[k];
      if (!(g.step > 0.0) || g.hi < g.lo) throw ModelError("oracle: invalid grid axis");
      axes[k].lo = g.lo;
      axes[k].hi = g.hi;
      axes[k].step = g.step;
    }
  }

  std::vector<int> leaf_nodes = tree.leaves();
  std::vector<Vec> probs = pset.leaf_probabilities();
  BruteForceResult res;
  Vec positions(tree.internal_nodes().size() * d, 0.0);
  auto price_at = [&](const Vec& point) {
    for (std::size_t k = 0; k < axes.size(); ++k) positions[axes[k].index] = point[k];
    const Vec g = walk_gains(tree, positions);
    for (std::size_t v = 0; v < tree.size(); ++v)
      if (pset.supported(static_cast<int>(v)) && g[v] < -floor) return kInfinity;
    Vec y(leaf_nodes.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = g[leaf_nodes[i]] - x.payoff[i];
    const double need = naive_robust_oce(probs, y, spec);
    // Smallest grid price whose hedged position is acceptable.
    double m = std::ceil(need / grid.m_step - 1e-9) * grid.m_step;
    Vec shifted = y;
    for (double& v : shifted) v += m;
    if (naive_robust_oce(probs, shifted, spec) > 1e-12 * std::max(1.0, std::abs(m))) m += grid.m_step;
    return m;
  };

  // Round 0 spans the axes; later rounds keep 2 old steps either side.
  std::vector<long long> lo_idx(axes.size());
  std::vector<long long> hi_idx(axes.size());
  Vec center(axes.size(), 0.0);
  Vec step(axes.size());
  for (std::size_t k = 0; k < axes.size(); ++k) {
    step[k] = axes[k].step;
    center[k] = 0.0;
    lo_idx[k] = static_cast<long long>(std::ceil(axes[k].lo / step[k] - 1e-9));
    hi_idx[k] = static_cast<long long>(std::floor(axes[k].hi / step[k] + 1e-9));
  }
  // Reported in gains units, or in the first explicit axis' units.
  double unit_step = grid.z_axes.empty() ? grid.z_step : grid.z_axes.front().step;
  for (int round = 0; round <= grid.rounds; ++round) {
    long long count = 1;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      count *= hi_idx[k] - lo_idx[k] + 1;
      if (count > grid.max_points) throw ModelError("oracle: grid exceeds the point guard");
    }
    std::vector<long long> idx = lo_idx;
    Vec point(axes.size());
    Vec best_point = center;
    for (long long n = 0; n < count; ++n) {
      for (std::size_t k = 0; k < axes.size(); ++k) point[k] = center[k] + static_cast<double>(idx[k]) * step[k];
      const double m = price_at(point);
      if (m < res.price) {
        res.price = m;
        best_point = point;
      }
      for (std::size_t k = 0; k < axes.size(); ++k) {
        if (++idx[k] <= hi_idx[k]) break;
        idx[k] = lo_idx[k];
      }
    }
    res.points += count;
    res.final_z_step = unit_step;
    unit_step /= grid.refine_factor;
    center = best_point;
    const long long half = static_cast<long long>(std::llround(2.0 * grid.refine_factor));
    for (std::size_t k = 0; k < axes.size(); ++k) {
      step[k] /= grid.refine_factor;
      lo_idx[k] = -half;
      hi_idx[k] = half;
    }
  }
  res.positions.assign(positions.size(), 0.0);
  for (std::size_t k = 0; k < axes.size(); ++k) res.positions[axes[k].index] = center[k];
  return res;
}

std::vector<Vertex> enumerate_martingale_vertices(const ScenarioTree& tree, const NodeMask& support,
                                                  long long max_bases) {
  if (support.size() != tree.size()) throw ModelError("oracle: support mask does not match the tree");
  const std::size_t d = tree.assets();
  std::vector<std::size_t> cols;  // positions in tree.leaves()
  for (std::size_t i = 0; i < tree.leaves().size(); ++i)
    if (support[tree.leaves()[i]]) cols.push_back(i);
  const std::size_t n = cols.size();

  // Rows: total mass, then sum over leaves below v of q * (S(child) - S(v)).
  std::vector<Vec> rows;
  Vec rhs;
  rows.emplace_back(n, 1.0);
  rhs.push_back(1.0);
  for (int v : tree.internal_nodes()) {
    if (!support[v]) continue;
    for (std::size_t j = 0; j < d; ++j) {
      Vec row(n, 0.0);
      for (std::size_t k = 0; k < n; ++k) {
        int u = tree.leaves()[cols[k]];
        while (u != tree.root() && tree.parent(u) != v) u = tree.parent(u);
        if (u != tree.root()) row[k] = tree.price(u)[j] - tree.price(v)[j];
      }
      rows.push_back(row);
      rhs.push_back(0.0);
    }
  }

  // Independent rows by elimination on a copy.
  std::vector<std::size_t> keep;
  {
    std::vector<Vec> work;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      Vec a = rows[r];
      a.push_back(rhs[r]);
      double scale = 0.0;
      for (double v : a) scale = std::max(scale, std::abs(v));
      for (const auto& w : work) {
        std::size_t lead = 0;
        while (std::abs(w[lead]) < 1e-12) ++lead;
        const double f = a[lead] / w[lead];
        for (std::size_t c = 0; c < a.size(); ++c) a[c] -= f * w[c];
      }
      double resid = 0.0;
      for (std::size_t c = 0; c < n; ++c) resid = std::max(resid, std::abs(a[c]));
      if (resid > 1e-9 * std::max(1.0, scale)) {
        // Normalize the lead to keep later eliminations stable.
        std::size_t lead = 0;
        while (std::abs(a[lead]) < 1e-12) ++lead;
        for (std::size_t c = 0; c < a.size(); ++c)
          if (c != lead) a[c] /= a[lead];
        a[lead] = 1.0;
        work.push_back(a);
        keep.push_back(r);
      } else if (std::abs(a[n]) > 1e-9 * std::max(1.0, scale)) {
        return {};  // inconsistent system: no martingale measure
      }
    }
  }
  const std::size_t rank = keep.size();
  if (n < rank || n - rank > 12) throw ModelError("oracle: martingale polytope dimension exceeds 12");
  {
    // C(n, rank) with early exit.
    double bases = 1.0;
    for (std::size_t i = 0; i < rank; ++i) bases = bases * static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (bases > static_cast<double>(max_bases)) throw ModelError("oracle: too many candidate bases");
  }

  std::vector<Vec> found;
  std::vector<std::size_t> pick(rank);
  std::iota(pick.begin(), pick.end(), 0);
  while (true) {
    std::vector<Vec> a(rank, Vec(rank));
    Vec b(rank);
    for (std::size_t r = 0; r < rank; ++r) {
      for (std::size_t c = 0; c < rank; ++c) a[r][c] = rows[keep[r]][pick[c]];
      b[r] = rhs[keep[r]];
    }
    Vec xb;
    if (solve_square(a, b, xb, 1e-10)) {
      bool nonneg = true;
      for (double v : xb) nonneg = nonneg && v >= -1e-10;
      if (nonneg) {
        Vec q(tree.leaves().size(), 0.0);
        for (std::size_t c = 0; c < rank; ++c) q[cols[pick[c]]] = std::max(0.0, xb[c]);
        bool dup = false;
        for (const auto& f : found) {
          double diff = 0.0;
          for (std::size_t i = 0; i < q.size(); ++i) diff = std::max(diff, std::abs(f[i] - q[i]));
          if (diff < 1e-9) {
            dup = true;
            break;
          }
        }
        if (!dup) found.push_back(q);
      }
    }
    // Next combination in lexicographic order.
    std::size_t i = rank;
    while (i > 0 && pick[i - 1] == n - rank + i - 1) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t k = i; k < rank; ++k) pick[k] = pick[k - 1] + 1;
  }

  std::vector<Vertex> out;
  for (auto& q : found) {
    TreeMeasure m = TreeMeasure::from_leaf_probabilities(tree, q);
    out.push_back({std::move(q), std::move(m)});
  }
  return out;
}

}  // namespace robhedge::oracle
