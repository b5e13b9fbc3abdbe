#pragma once

// Loss functions l for optimized certainty equivalents and their convex
// conjugates l*(y) = sup_x (x y - l(x)).

#include <string>
#include <vector>

#include "robhedge/market.hpp"

namespace robhedge {

enum class LossKind { power, cvar, entropic, piecewise_linear, strict_cone };

// l(x) = slope * x + intercept on one linear segment.
struct AffinePiece {
  double slope;
  double intercept;
};

class LossSpec {
 public:
  // l(x) = (x+)^p / p, p > 1.
  static LossSpec power(double p);
  // l(x) = x+ / alpha, alpha in (0, 1).
  static LossSpec cvar(double alpha);
  // l(x) = e^x - 1.
  static LossSpec entropic();
  // Continuous, convex, l(0) = 0; slopes[i] applies between breakpoints[i-1]
  // and breakpoints[i]. Needs slopes.size() == breakpoints.size() + 1.
  static LossSpec piecewise_linear(std::vector<double> breakpoints, std::vector<double> slopes);
  // Positive-cone acceptance set: no loss function.
  static LossSpec strict_cone();

  LossKind kind() const noexcept { return kind_; }
  std::string name() const;
  double p() const noexcept { return p_; }
  double alpha() const noexcept { return alpha_; }
  // Hoelder conjugate of p for the power loss.
  double q() const noexcept { return p_ / (p_ - 1.0); }
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<double>& slopes() const noexcept { return slopes_; }

  bool is_strict_cone() const noexcept { return kind_ == LossKind::strict_cone; }
  // cvar and piecewise_linear: l is a finite max of affine pieces.
  bool is_polyhedral() const noexcept { return kind_ == LossKind::cvar || kind_ == LossKind::piecewise_linear; }

  // Affine pieces whose pointwise max is l; polyhedral kinds only.
  std::vector<AffinePiece> pieces() const;
  // Breakpoints and slope range in the cvar/piecewise representation.
  std::vector<double> kinks() const;
  std::vector<double> kink_slopes() const;

 private:
  LossKind kind_ = LossKind::strict_cone;
  double p_ = 0.0;
  double alpha_ = 0.0;
  std::vector<double> breakpoints_;
  std::vector<double> slopes_;
};

double eval_l(const LossSpec& spec, double x);
// Right derivative of l.
double eval_l_prime(const LossSpec& spec, double x);
// y >= 0, +infinity allowed; returns +infinity outside the effective domain.
double eval_l_star(const LossSpec& spec, double y);
// Derivative of l* on the interior of its domain (smooth kinds only).
double eval_l_star_prime(const LossSpec& spec, double y);

// sup_x (x y - l(x)) by bracket doubling and golden-section search; used for
// custom kinds and as a cross-check of the analytic conjugates.
double numeric_conjugate(const LossSpec& spec, double y);

struct CibDiagnostic {
  bool convex = false;
  bool increasing = false;
  bool bounded_below = false;
  bool l0_zero = false;
  bool lstar1_zero = false;
  double lstar1 = 0.0;
  // l(x) > x for |x| >= growth_radius (checked out to a large range).
  bool growth_margin = false;
  double growth_radius = 0.0;
  // One-sided power growth l(x) >= a x^p + b for x >= 0, when known.
  bool has_power_growth = false;
  double growth_a = 0.0;
  double growth_b = 0.0;
  double growth_p = 0.0;
  std::vector<std::string> warnings;

  bool all_pass() const noexcept {
    return convex && increasing && bounded_below && l0_zero && lstar1_zero && growth_margin;
  }
};

CibDiagnostic validate_cib(const LossSpec& spec);

}  // namespace robhedge
