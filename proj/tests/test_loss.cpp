#include <cmath>

#include "doctest.h"
#include "support.hpp"

using namespace robhedge;

namespace {

// sup_x (x y - l(x)) by a dense grid plus local refinement on [-40, 40].
double grid_conjugate(const LossSpec& spec, double y) {
  double best_x = 0.0, best = -kInfinity;
  for (double x = -40.0; x <= 40.0; x += 1e-3) {
    const double v = x * y - eval_l(spec, x);
    if (v > best) best = v, best_x = x;
  }
  for (double h = 1e-3; h > 1e-12; h /= 10.0)
    for (double x = best_x - 10 * h; x <= best_x + 10 * h; x += h) {
      const double v = x * y - eval_l(spec, x);
      if (v > best) best = v, best_x = x;
    }
  return best;
}

}  // namespace

TEST_SUITE("loss") {
  TEST_CASE("eval_l examples") {
    CHECK(eval_l(LossSpec::power(3.0), 2.0) == doctest::Approx(8.0 / 3.0));
    CHECK(eval_l(LossSpec::power(3.0), -2.0) == 0.0);
    CHECK(eval_l(LossSpec::cvar(0.5), 2.0) == doctest::Approx(4.0));
    CHECK(eval_l(LossSpec::cvar(0.5), -2.0) == 0.0);
    CHECK(eval_l(LossSpec::entropic(), 0.0) == 0.0);
    CHECK(eval_l(LossSpec::entropic(), 1.0) == doctest::Approx(std::exp(1.0) - 1.0));
    CHECK_THROWS(eval_l(LossSpec::strict_cone(), 1.0));
  }

  TEST_CASE("eval_l_star examples") {
    CHECK(eval_l_star(LossSpec::power(3.0), 4.0) == doctest::Approx(16.0 / 3.0));
    CHECK(grid_conjugate(LossSpec::power(3.0), 4.0) == doctest::Approx(16.0 / 3.0).epsilon(1e-8));
    CHECK(eval_l_star(LossSpec::cvar(0.5), 1.5) == 0.0);
    CHECK(std::isinf(eval_l_star(LossSpec::cvar(0.5), 2.5)));
    CHECK(eval_l_star(LossSpec::entropic(), 1.0) == doctest::Approx(0.0));
    CHECK(eval_l_star(LossSpec::entropic(), 0.0) == doctest::Approx(1.0));
    CHECK(std::isinf(eval_l_star(LossSpec::entropic(), kInfinity)));
    CHECK_THROWS(eval_l_star(LossSpec::entropic(), -1.0));
  }

  TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(LossSpec::power(1.0), ModelError);
    CHECK_THROWS_AS(LossSpec::cvar(0.0), ModelError);
    CHECK_THROWS_AS(LossSpec::cvar(1.0), ModelError);
    CHECK_THROWS_AS(LossSpec::piecewise_linear({0.0}, {1.0}), ModelError);
    CHECK_THROWS_AS(LossSpec::piecewise_linear({0.0}, {2.0, 1.0}), ModelError);
    CHECK_THROWS_AS(LossSpec::piecewise_linear({0.0}, {-1.0, 2.0}), ModelError);
    CHECK_NOTHROW(LossSpec::piecewise_linear({0.0}, {0.0, 2.0}));
  }

  TEST_CASE("Fenchel-Young inequality") {
    for (const auto& spec : {LossSpec::power(3.0), LossSpec::power(1.5), LossSpec::cvar(0.5), LossSpec::cvar(0.9),
                             LossSpec::entropic(), LossSpec::piecewise_linear({-1.0, 1.0}, {0.2, 1.0, 3.0})})
      for (double x = -10.0; x <= 10.0; x += 0.5)
        for (double y = 0.0; y <= 10.0; y += 0.25) CHECK(x * y <= eval_l(spec, x) + eval_l_star(spec, y) + 1e-9);
  }

  TEST_CASE("analytic conjugates match numeric suprema") {
    for (const auto& spec : {LossSpec::power(3.0), LossSpec::power(2.0), LossSpec::entropic()})
      for (double y = 0.0; y <= 3.0; y += 0.25) {
        const double analytic = eval_l_star(spec, y);
        CHECK(numeric_conjugate(spec, y) == doctest::Approx(analytic).epsilon(1e-8));
        CHECK(std::abs(grid_conjugate(spec, y) - analytic) <= 1e-8 * std::max(1.0, analytic));
      }
    const auto pw = LossSpec::piecewise_linear({-1.0, 1.0}, {0.5, 1.0, 2.0});
    for (double y = 0.5; y <= 2.0; y += 0.25)
      CHECK(std::abs(eval_l_star(pw, y) - grid_conjugate(pw, y)) <= 1e-8);
    CHECK(std::isinf(eval_l_star(pw, 2.5)));
  }

  TEST_CASE("l star is nondecreasing on y >= 1") {
    for (const auto& spec : {LossSpec::power(3.0), LossSpec::entropic(), LossSpec::cvar(0.8)}) {
      double prev = eval_l_star(spec, 1.0);
      for (double y = 1.0; y <= 10.0; y += 0.1) {
        const double v = eval_l_star(spec, y);
        CHECK(v >= prev - 1e-12);
        prev = v;
      }
    }
  }

  TEST_CASE("validate_cib diagnostics") {
    const auto ent = validate_cib(LossSpec::entropic());
    CHECK(ent.all_pass());
    CHECK(ent.lstar1 == doctest::Approx(0.0));
    const auto cv = validate_cib(LossSpec::cvar(0.5));
    CHECK(cv.all_pass());
    CHECK(cv.lstar1 == 0.0);
    const auto pw = validate_cib(LossSpec::power(3.0));
    CHECK_FALSE(pw.lstar1_zero);
    CHECK(pw.lstar1 == doctest::Approx(2.0 / 3.0));
    CHECK(pw.convex);
    CHECK(pw.increasing);
    CHECK(pw.l0_zero);
    CHECK_FALSE(pw.warnings.empty());
    CHECK(pw.has_power_growth);
  }
}
