#include "robhedge/loss.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace robhedge {

namespace {

constexpr double kGolden = 0.6180339887498949;
constexpr double kConjugateTol = 1e-10;
const double kMaxBracket = std::ldexp(1.0, 60);

// Integral of the slope function from 0 to x.
double integrate_slopes(const std::vector<double>& kinks, const std::vector<double>& slopes, double x) {
  const double lo = std::min(0.0, x);
  const double hi = std::max(0.0, x);
  double total = 0.0;
  for (std::size_t j = 0; j < slopes.size(); ++j) {
    const double a = j == 0 ? -kInfinity : kinks[j - 1];
    const double b = j == kinks.size() ? kInfinity : kinks[j];
    const double len = std::min(hi, b) - std::max(lo, a);
    if (len > 0.0) total += slopes[j] * len;
  }
  return x >= 0.0 ? total : -total;
}

double golden_max(auto&& f, double lo, double hi, double tol) {
  double a = hi - kGolden * (hi - lo);
  double b = lo + kGolden * (hi - lo);
  double fa = f(a);
  double fb = f(b);
  for (int it = 0; it < 400 && hi - lo > tol * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
    if (fa >= fb) {
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
  return std::max({fa, fb, f(0.5 * (lo + hi))});
}

}  // namespace

LossSpec LossSpec::power(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ModelError("power loss requires p > 1");
  LossSpec s;
  s.kind_ = LossKind::power;
  s.p_ = p;
  return s;
}

LossSpec LossSpec::cvar(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ModelError("cvar loss requires alpha in (0, 1)");
  LossSpec s;
  s.kind_ = LossKind::cvar;
  s.alpha_ = alpha;
  return s;
}

LossSpec LossSpec::entropic() {
  LossSpec s;
  s.kind_ = LossKind::entropic;
  return s;
}

LossSpec LossSpec::piecewise_linear(std::vector<double> breakpoints, std::vector<double> slopes) {
  if (slopes.size() != breakpoints.size() + 1)
    throw ModelError("piecewise_linear loss needs exactly one more slope than breakpoints");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (!std::isfinite(breakpoints[i])) throw ModelError("piecewise_linear breakpoints must be finite");
    if (i > 0 && !(breakpoints[i] > breakpoints[i - 1]))
      throw ModelError("piecewise_linear breakpoints must be strictly increasing");
  }
  for (std::size_t i = 0; i < slopes.size(); ++i) {
    if (!(slopes[i] >= 0.0) || !std::isfinite(slopes[i]))
      throw ModelError("piecewise_linear slopes must be finite and nonnegative");
    if (i > 0 && slopes[i] < slopes[i - 1]) throw ModelError("piecewise_linear slopes must be nondecreasing");
  }
  LossSpec s;
  s.kind_ = LossKind::piecewise_linear;
  s.breakpoints_ = std::move(breakpoints);
  s.slopes_ = std::move(slopes);
  return s;
}

LossSpec LossSpec::strict_cone() { return LossSpec{}; }

std::string LossSpec::name() const {
  std::ostringstream os;
  switch (kind_) {
    case LossKind::power: os << "power(p=" << p_ << ")"; break;
    case LossKind::cvar: os << "cvar(alpha=" << alpha_ << ")"; break;
    case LossKind::entropic: os << "entropic"; break;
    case LossKind::piecewise_linear: os << "piecewise_linear"; break;
    case LossKind::strict_cone: os << "strict_cone"; break;
  }
  return os.str();
}

std::vector<double> LossSpec::kinks() const {
  if (kind_ == LossKind::cvar) return {0.0};
  if (kind_ == LossKind::piecewise_linear) return breakpoints_;
  throw ModelError(name() + " is not polyhedral");
}

std::vector<double> LossSpec::kink_slopes() const {
  if (kind_ == LossKind::cvar) return {0.0, 1.0 / alpha_};
  if (kind_ == LossKind::piecewise_linear) return slopes_;
  throw ModelError(name() + " is not polyhedral");
}

std::vector<AffinePiece> LossSpec::pieces() const {
  const auto k = kinks();
  const auto s = kink_slopes();
  std::vector<AffinePiece> out;
  for (std::size_t j = 0; j < s.size(); ++j) {
    // Anchor each segment at a point inside it.
    double x0 = 0.0;
    if (!k.empty()) x0 = j == 0 ? k.front() : k[j - 1];
    const double l0 = integrate_slopes(k, s, x0);
    out.push_back({s[j], l0 - s[j] * x0});
  }
  return out;
}

double eval_l(const LossSpec& spec, double x) {
  switch (spec.kind()) {
    case LossKind::power: return x > 0.0 ? std::pow(x, spec.p()) / spec.p() : 0.0;
    case LossKind::cvar: return x > 0.0 ? x / spec.alpha() : 0.0;
    case LossKind::entropic: return std::expm1(x);
    case LossKind::piecewise_linear: return integrate_slopes(spec.breakpoints(), spec.slopes(), x);
    case LossKind::strict_cone: break;
  }
  throw ModelError("strict_cone has no pointwise loss function");
}

double eval_l_prime(const LossSpec& spec, double x) {
  switch (spec.kind()) {
    case LossKind::power: return x > 0.0 ? std::pow(x, spec.p() - 1.0) : 0.0;
    case LossKind::cvar: return x >= 0.0 ? 1.0 / spec.alpha() : 0.0;
    case LossKind::entropic: return std::exp(x);
    case LossKind::piecewise_linear: {
      const auto& b = spec.breakpoints();
      const auto seg = static_cast<std::size_t>(std::upper_bound(b.begin(), b.end(), x) - b.begin());
      return spec.slopes()[seg];
    }
    case LossKind::strict_cone: break;
  }
  throw ModelError("strict_cone has no pointwise loss function");
}

double eval_l_star(const LossSpec& spec, double y) {
  if (std::isnan(y) || y < 0.0) throw ModelError("l* is evaluated at nonnegative densities only");
  if (std::isinf(y)) return kInfinity;
  switch (spec.kind()) {
    case LossKind::power: return std::pow(y, spec.q()) / spec.q();
    case LossKind::cvar: return y <= 1.0 / spec.alpha() ? 0.0 : kInfinity;
    case LossKind::entropic: return y == 0.0 ? 1.0 : y * std::log(y) - y + 1.0;
    case LossKind::piecewise_linear: return numeric_conjugate(spec, y);
    case LossKind::strict_cone: break;
  }
  throw ModelError("strict_cone has no conjugate loss");
}

double eval_l_star_prime(const LossSpec& spec, double y) {
  switch (spec.kind()) {
    case LossKind::power: return std::pow(y, spec.q() - 1.0);
    case LossKind::entropic: return y > 0.0 ? std::log(y) : -kInfinity;
    default: break;
  }
  throw ModelError(spec.name() + ": l* is not differentiable");
}

double numeric_conjugate(const LossSpec& spec, double y) {
  if (std::isinf(y)) return kInfinity;
  auto f = [&](double x) { return x * y - eval_l(spec, x); };
  double r = 1.0;
  while (f(r) > f(0.5 * r) || f(-r) > f(-0.5 * r)) {
    r *= 2.0;
    if (r > kMaxBracket) return kInfinity;
  }
  return golden_max(f, -r, r, kConjugateTol);
}

CibDiagnostic validate_cib(const LossSpec& spec) {
  CibDiagnostic d;
  if (spec.is_strict_cone()) {
    d.warnings.push_back("strict_cone has no loss function; acceptance set is the positive cone");
    return d;
  }
  switch (spec.kind()) {
    case LossKind::power:
      d.convex = d.increasing = d.bounded_below = d.l0_zero = true;
      d.lstar1 = 1.0 / spec.q();
      d.growth_margin = true;
      d.growth_radius = std::pow(spec.p(), 1.0 / (spec.p() - 1.0));
      d.has_power_growth = true;
      d.growth_a = 1.0 / spec.p();
      d.growth_b = 0.0;
      d.growth_p = spec.p();
      if (spec.p() <= 2.0) d.warnings.push_back("power growth exponent p <= 2");
      d.warnings.push_back("power growth bound holds on x >= 0 only; l is flat on x < 0");
      break;
    case LossKind::cvar:
      d.convex = d.increasing = d.bounded_below = d.l0_zero = true;
      d.lstar1 = 0.0;  // 1 <= 1/alpha
      d.growth_margin = true;
      d.growth_radius = 0.0;
      break;
    case LossKind::entropic:
      d.convex = d.increasing = d.bounded_below = d.l0_zero = true;
      d.lstar1 = 0.0;
      d.growth_margin = true;
      d.growth_radius = 0.0;
      break;
    case LossKind::piecewise_linear: {
      // Sign-symmetric grid, doubling range out to 2^40.
      std::vector<double> grid{0.0};
      for (double r = 1.0 / 64.0; r <= std::ldexp(1.0, 40); r *= 2.0) {
        for (double frac : {0.5, 0.75, 1.0}) {
          grid.push_back(r * frac);
          grid.push_back(-r * frac);
        }
      }
      for (double b : spec.breakpoints()) grid.push_back(b);
      std::sort(grid.begin(), grid.end());
      grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
      Vec lv(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) lv[i] = eval_l(spec, grid[i]);
      d.increasing = true;
      d.convex = true;
      for (std::size_t i = 1; i < grid.size(); ++i) {
        if (lv[i] < lv[i - 1] - 1e-12 * (1.0 + std::abs(lv[i]))) d.increasing = false;
        if (i + 1 < grid.size()) {
          const double s0 = (lv[i] - lv[i - 1]) / (grid[i] - grid[i - 1]);
          const double s1 = (lv[i + 1] - lv[i]) / (grid[i + 1] - grid[i]);
          if (s1 < s0 - 1e-9 * (1.0 + std::abs(s0))) d.convex = false;
        }
      }
      d.bounded_below = spec.slopes().front() == 0.0 || spec.slopes().front() > 0.0;
      d.l0_zero = std::abs(eval_l(spec, 0.0)) < 1e-15;
      d.lstar1 = numeric_conjugate(spec, 1.0);
      double radius = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (!(lv[i] > grid[i])) radius = std::max(radius, std::abs(grid[i]));
      d.growth_radius = radius;
      // l(x) > x far out needs the outer slopes to straddle 1.
      d.growth_margin = spec.slopes().back() > 1.0 && spec.slopes().front() < 1.0 &&
                        radius < std::ldexp(1.0, 40);
      break;
    }
    case LossKind::strict_cone: break;
  }
  d.lstar1_zero = std::abs(d.lstar1) <= 1e-12;
  if (!d.lstar1_zero) {
    std::ostringstream os;
    os << "l*(1) = " << d.lstar1 << " != 0: the risk measure is not normalized (rho(0) = " << -d.lstar1 << ")";
    d.warnings.push_back(os.str());
  }
  if (!d.growth_margin) d.warnings.push_back("l(x) > x fails for large |x|; OCE minimization may be unbounded");
  return d;
}

}  // namespace robhedge
