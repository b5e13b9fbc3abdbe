#include "robhedge/risk.hpp"

#include <algorithm>
#include <cmath>

#include "robhedge/penalized.hpp"

namespace robhedge {

namespace {

constexpr double kGolden = 0.6180339887498949;
const double kMaxShift = std::ldexp(1.0, 60);

void check_distribution(const std::vector<Vec>& probs, std::span<const double> x) {
  if (probs.empty()) throw ModelError("reference measure set is empty");
  for (const auto& p : probs) {
    if (p.size() != x.size()) throw ModelError("probability and outcome vectors differ in length");
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] > 0.0 && !std::isfinite(x[i])) throw ModelError("claim is not finite on the support");
  }
}

// max_k E_k[l(m - X)] - m and the attaining k.
std::pair<double, int> robust_objective(const std::vector<Vec>& probs, std::span<const double> x, const LossSpec& spec,
                                        double m) {
  double best = -kInfinity;
  int arg = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    double e = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (probs[k][i] > 0.0) e += probs[k][i] * eval_l(spec, m - x[i]);
    if (e > best) {
      best = e;
      arg = static_cast<int>(k);
    }
  }
  return {best - m, arg};
}

}  // namespace

RiskResult robust_oce(const std::vector<Vec>& probs, std::span<const double> x, const LossSpec& spec) {
  if (spec.is_strict_cone()) throw ModelError("OCE needs a loss function; strict_cone has none");
  check_distribution(probs, x);
  auto f = [&](double m) { return robust_objective(probs, x, spec, m).first; };

  double scale = 0.0;
  for (const auto& p : probs)
    for (std::size_t i = 0; i < x.size(); ++i)
      if (p[i] > 0.0) scale = std::max(scale, std::abs(x[i]));
  double r = scale + 1.0;
  // Expand until the convex objective stops decreasing towards both ends.
  while (f(r) < f(0.5 * r) || f(-r) < f(-0.5 * r)) {
    r *= 2.0;
    if (r > kMaxShift) throw UnboundedError("OCE objective is not bounded below (loss violates the growth condition)");
  }

  double lo = -r;
  double hi = r;
  double a = hi - kGolden * (hi - lo);
  double b = lo + kGolden * (hi - lo);
  double fa = f(a);
  double fb = f(b);
  for (int it = 0; it < 500 && hi - lo > 1e-12 * r; ++it) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - kGolden * (hi - lo);
      fa = f(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + kGolden * (hi - lo);
      fb = f(b);
    }
  }
  const double m = fa <= fb ? a : b;
  const auto [value, worst] = robust_objective(probs, x, spec, m);
  return {value, m, worst};
}

RiskResult oce(std::span<const double> probs, std::span<const double> x, const LossSpec& spec) {
  return robust_oce(std::vector<Vec>{Vec(probs.begin(), probs.end())}, x, spec);
}

RiskResult oce(const TreeMeasure& p, const Claim& x, const LossSpec& spec) {
  return oce(p.leaf_probabilities(), x.payoff, spec);
}

RiskResult robust_oce(const ReferenceMeasureSet& pset, const Claim& x, const LossSpec& spec) {
  return robust_oce(pset.leaf_probabilities(), x.payoff, spec);
}

bool is_acceptable(const std::vector<Vec>& probs, std::span<const double> x, const LossSpec& spec) {
  if (spec.is_strict_cone()) {
    for (const auto& p : probs)
      for (std::size_t i = 0; i < x.size(); ++i)
        if (p[i] > 0.0 && !(x[i] >= -kAcceptanceTol)) return false;
    return true;
  }
  return robust_oce(probs, x, spec).value <= kAcceptanceTol;
}

bool is_acceptable(const ReferenceMeasureSet& pset, std::span<const double> x, const LossSpec& spec) {
  return is_acceptable(pset.leaf_probabilities(), x, spec);
}

double reference_penalty(std::span<const double> q, std::span<const double> p, const LossSpec& spec) {
  return mixture_penalty(Vec(q.begin(), q.end()), {Vec(p.begin(), p.end())}, {1.0}, spec);
}

double member_penalty(std::span<const double> q, const std::vector<Vec>& probs, const LossSpec& spec) {
  double best = kInfinity;
  for (const auto& p : probs) best = std::min(best, reference_penalty(q, p, spec));
  return best;
}

PenaltyResult divergence_penalty(std::span<const double> q, const std::vector<Vec>& probs, const LossSpec& spec) {
  if (spec.is_strict_cone()) throw ModelError("strict_cone has no divergence penalty");
  if (probs.empty()) throw ModelError("reference measure set is empty");
  PenaltyResult out;
  if (probs.size() == 1) {
    out.value = reference_penalty(q, probs.front(), spec);
    out.mixture = {1.0};
    return out;
  }
  // Fix q through identity rows and optimize the mixture weights only.
  EqualitySystem fixed;
  for (std::size_t i = 0; i < q.size(); ++i) {
    Vec row(q.size(), 0.0);
    row[i] = 1.0;
    fixed.rows.push_back(std::move(row));
    fixed.rhs.push_back(q[i]);
  }
  const auto res = maximize_penalized(fixed, Vec(q.size(), 0.0), probs, spec);
  if (res.status == ProgramStatus::infeasible) return out;
  out.value = res.penalty;
  out.mixture = res.mixture;
  // The vertex minimum is always a valid upper bound.
  const double members = member_penalty(q, probs, spec);
  if (members < out.value) {
    out.value = members;
    out.mixture.assign(probs.size(), 0.0);
    for (std::size_t k = 0; k < probs.size(); ++k) {
      if (reference_penalty(q, probs[k], spec) == members) {
        out.mixture[k] = 1.0;
        break;
      }
    }
  }
  return out;
}

PenaltyResult divergence_penalty(const TreeMeasure& q, const ReferenceMeasureSet& pset, const LossSpec& spec) {
  return divergence_penalty(q.leaf_probabilities(), pset.leaf_probabilities(), spec);
}

DualOceResult dual_oce(const std::vector<Vec>& probs, std::span<const double> x, const LossSpec& spec) {
  if (spec.is_strict_cone()) throw ModelError("dual OCE needs a loss function; strict_cone has none");
  check_distribution(probs, x);
  const std::size_t n = x.size();
  EqualitySystem simplex{{Vec(n, 1.0)}, {1.0}};
  Vec payoff(n, 0.0);
  for (const auto& p : probs)
    for (std::size_t i = 0; i < n; ++i)
      if (p[i] > 0.0) payoff[i] = -x[i];
  const auto res = maximize_penalized(simplex, payoff, probs, spec);
  if (res.status == ProgramStatus::infeasible) throw SolverError("dual OCE program is infeasible");
  return {res.value, res.q, res.mixture, res.penalty, res.iterations};
}

DualOceResult dual_oce(const ReferenceMeasureSet& pset, const Claim& x, const LossSpec& spec) {
  return dual_oce(pset.leaf_probabilities(), x.payoff, spec);
}

}  // namespace robhedge
