#include <cmath>

#include "doctest.h"
#include "robhedge/oracle.hpp"
#include "robhedge/risk.hpp"
#include "support.hpp"

using namespace robhedge;
using namespace testing;

namespace {

const LossSpec kSpecs[] = {LossSpec::cvar(0.5), LossSpec::cvar(0.8), LossSpec::entropic(), LossSpec::power(3.0)};

// Exact inner max of the robust OCE objective on a dense m-grid, refined
// locally around the best point.
double grid_robust_oce(const std::vector<Vec>& probs, const Vec& x, const LossSpec& spec) {
  auto obj = [&](double m) {
    double worst = -kInfinity;
    for (const auto& p : probs) {
      double e = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) e += p[i] * eval_l(spec, m - x[i]);
      worst = std::max(worst, e - m);
    }
    return worst;
  };
  double lo = -60.0, best_m = 0.0, best = kInfinity;
  for (double m = lo; m <= 60.0; m += 1e-2)
    if (const double v = obj(m); v < best) best = v, best_m = m;
  for (double m = best_m - 2e-2; m <= best_m + 2e-2; m += 1e-4) best = std::min(best, obj(m));
  return best;
}

}  // namespace

TEST_SUITE("risk") {
  TEST_CASE("oce examples") {
    const Vec four{0.25, 0.25, 0.25, 0.25};
    CHECK(oce(four, Vec{1.0, 2.0, 3.0, 4.0}, LossSpec::cvar(0.5)).value == doctest::Approx(-1.5).epsilon(1e-9));
    CHECK(oce(Vec{0.5, 0.5}, Vec{2.0, 2.0}, LossSpec::entropic()).value == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(oce(Vec{0.5, 0.5}, Vec{0.0, std::log(2.0)}, LossSpec::entropic()).value ==
          doctest::Approx(std::log(0.75)).epsilon(1e-9));
  }

  TEST_CASE("robust oce examples") {
    InstanceGenerator gen(21);
    for (const auto& spec : kSpecs) {
      const Vec p = gen.distribution(5), x = gen.outcomes(5);
      CHECK(robust_oce({p}, x, spec).value == oce(p, x, spec).value);
    }
    for (const auto& spec : {LossSpec::cvar(0.5), LossSpec::entropic(), LossSpec::cvar(0.9)}) {
      const std::vector<Vec> probs{gen.distribution(3), gen.distribution(3)};
      CHECK(robust_oce(probs, Vec{4.0, 4.0, 4.0}, spec).value == doctest::Approx(-4.0).epsilon(1e-9));
    }
    const std::vector<Vec> two{{0.5, 0.3, 0.2}, {0.2, 0.3, 0.5}};
    const Vec x{20.0, 0.0, 0.0};
    const auto spec = LossSpec::cvar(0.8);
    const double rob = robust_oce(two, x, spec).value;
    for (const auto& p : two) CHECK(rob >= oce(p, x, spec).value - 1e-9);
    CHECK(rob == doctest::Approx(grid_robust_oce(two, x, spec)).epsilon(1e-6));
  }

  TEST_CASE("robust oce reports the worst measure") {
    const std::vector<Vec> two{{0.9, 0.1}, {0.1, 0.9}};
    const auto r = robust_oce(two, Vec{10.0, 0.0}, LossSpec::entropic());
    CHECK(r.worst == 1);
    CHECK(r.value == doctest::Approx(oce(two[1], Vec{10.0, 0.0}, LossSpec::entropic()).value).epsilon(1e-9));
  }

  TEST_CASE("acceptance") {
    const std::vector<Vec> probs{{0.5, 0.5}};
    CHECK(is_acceptable(probs, Vec{0.0, 1.0}, LossSpec::cvar(0.5)));
    CHECK(is_acceptable(probs, Vec{0.0, 1.0}, LossSpec::strict_cone()));
    CHECK_FALSE(is_acceptable(probs, Vec{-1.0, -1.0}, LossSpec::entropic()));
    CHECK_FALSE(is_acceptable(probs, Vec{-1e-3, 5.0}, LossSpec::strict_cone()));
    // The zero-probability leaf is ignored by the strict cone.
    CHECK(is_acceptable(std::vector<Vec>{{1.0, 0.0}}, Vec{1.0, -5.0}, LossSpec::strict_cone()));
  }

  TEST_CASE("penalty examples") {
    const Vec p = uniform_step(3);
    CHECK(divergence_penalty(p, {p}, LossSpec::cvar(0.8)).value == 0.0);
    CHECK(std::isinf(divergence_penalty(Vec{0.5, 0.0, 0.5}, {Vec{0.5, 0.5, 0.0}}, LossSpec::entropic()).value));
    const double want = (2.0 / 3.0) * (1.0 / 3.0) * std::pow(1.5, 1.5) * 2.0;
    CHECK(divergence_penalty(Vec{0.5, 0.0, 0.5}, {p}, LossSpec::power(3.0)).value == doctest::Approx(want).epsilon(1e-9));
    CHECK(reference_penalty(Vec{0.5, 0.0, 0.5}, p, LossSpec::power(3.0)) == doctest::Approx(want).epsilon(1e-9));
  }

  TEST_CASE("penalty over mixtures is at most the member penalty") {
    InstanceGenerator gen(22);
    for (int it = 0; it < 20; ++it) {
      const std::vector<Vec> probs{gen.distribution(4), gen.distribution(4)};
      const Vec q = gen.distribution(4);
      for (const auto& spec : {LossSpec::entropic(), LossSpec::power(3.0)}) {
        const auto mix = divergence_penalty(q, probs, spec);
        CHECK(mix.value <= member_penalty(q, probs, spec) + 1e-9);
        CHECK(mix.mixture.size() == 2);
      }
    }
  }

  TEST_CASE("dual oce matches robust oce") {
    InstanceGenerator gen(23);
    for (int it = 0; it < 30; ++it) {
      const auto& spec = kSpecs[it % 4];
      const std::size_t n = 2 + it % 4;
      std::vector<Vec> probs;
      for (int k = 0; k <= it % 3; ++k) probs.push_back(gen.distribution(n));
      const Vec x = gen.outcomes(n);
      const auto d = dual_oce(probs, x, spec);
      const double r = robust_oce(probs, x, spec).value;
      CHECK(std::abs(d.value - r) <= 1e-6);
      // Q = P is feasible.
      double lb = -kInfinity;
      for (const auto& p : probs) lb = std::max(lb, -expectation(p, x) - eval_l_star(spec, 1.0));
      CHECK(d.value >= lb - 1e-9);
    }
  }

  TEST_CASE("cvar dual is the capped-density LP") {
    // max E_Q[-X] with q_i <= p_i / alpha: fill the worst outcomes first.
    const Vec p{0.1, 0.2, 0.3, 0.4};
    const Vec x{-3.0, 1.0, 2.0, 0.5};
    const double alpha = 0.5;
    const auto d = dual_oce({p}, x, LossSpec::cvar(alpha));
    CHECK(d.value == doctest::Approx(oracle::cvar_sorted(p, x, alpha)).epsilon(1e-9));
  }

  TEST_CASE("robust oce axioms") {
    InstanceGenerator gen(24);
    for (int it = 0; it < 20; ++it) {
      const auto& spec = kSpecs[it % 4];
      const std::vector<Vec> probs{gen.distribution(4), gen.distribution(4)};
      const Vec x = gen.outcomes(4), y = gen.outcomes(4);
      const double rx = robust_oce(probs, x, spec).value;
      for (double c : {-5.0, 0.3, 7.0}) {
        Vec xc = x;
        for (double& v : xc) v += c;
        CHECK(robust_oce(probs, xc, spec).value == doctest::Approx(rx - c).epsilon(1e-9));
      }
      Vec hi = x;
      for (double& v : hi) v += gen.uniform(0.0, 2.0);
      CHECK(rx >= robust_oce(probs, hi, spec).value - 1e-9);
      const double ry = robust_oce(probs, y, spec).value;
      for (double lam : {0.25, 0.5, 0.75}) {
        Vec z(4);
        for (int i = 0; i < 4; ++i) z[i] = lam * x[i] + (1 - lam) * y[i];
        CHECK(robust_oce(probs, z, spec).value <= lam * rx + (1 - lam) * ry + 1e-9);
      }
      double sup_inf = -kInfinity;
      for (const auto& p : probs) sup_inf = std::max(sup_inf, oce(p, x, spec).value);
      CHECK(rx >= sup_inf - 1e-9);
    }
  }

  TEST_CASE("normalization") {
    const std::vector<Vec> probs{{0.3, 0.7}};
    CHECK(robust_oce(probs, Vec{0.0, 0.0}, LossSpec::cvar(0.5)).value == doctest::Approx(0.0));
    CHECK(robust_oce(probs, Vec{0.0, 0.0}, LossSpec::entropic()).value == doctest::Approx(0.0));
    CHECK(robust_oce(probs, Vec{0.0, 0.0}, LossSpec::power(3.0)).value == doctest::Approx(-2.0 / 3.0));
  }
}
