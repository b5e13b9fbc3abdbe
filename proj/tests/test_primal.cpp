#include <cmath>

#include "doctest.h"
#include "robhedge/oracle.hpp"
#include "robhedge/primal.hpp"
#include "robhedge/risk.hpp"
#include "support.hpp"

using namespace robhedge;
using namespace testing;

TEST_SUITE("primal") {
  TEST_CASE("superhedging examples") {
    const auto b = binomial();
    const auto pb = single(b, {0.5, 0.5});
    const auto r = superhedge_price(b, pb, Claim::call(b, 100.0));
    CHECK(r.status == SolveStatus::optimal);
    CHECK(r.price == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(r.strategy.at(0)[0] == doctest::Approx(0.5).epsilon(1e-9));

    const auto c = superhedge_price(b, pb, Claim::constant(b, 3.0));
    CHECK(c.price == 3.0);
    CHECK(c.strategy.at(0)[0] == 0.0);

    const auto t = trinomial();
    const auto pt = single(t, uniform_step(3));
    CHECK(superhedge_price(t, pt, Claim::call(t, 100.0)).price == doctest::Approx(10.0).epsilon(1e-9));
  }

  TEST_CASE("superhedging detects arbitrage") {
    const auto t = ScenarioTree::generate({100.0}, {{1.2}, {1.1}}, 1);
    const auto r = superhedge_price(t, single(t, {0.5, 0.5}), Claim::call(t, 100.0));
    CHECK(r.status == SolveStatus::nonviable);
  }

  TEST_CASE("acceptance price examples") {
    const auto t = trinomial();
    const auto p = single(t, uniform_step(3));
    const auto x = Claim::call(t, 100.0);
    CHECK(accept_price(t, p, x, LossSpec::strict_cone()).price == superhedge_price(t, p, x).price);
    const auto cv = accept_price(t, p, x, LossSpec::cvar(0.9));
    CHECK(cv.price == doctest::Approx(20.0 / 2.7).epsilon(1e-9));
    CHECK(is_acceptable(p, cv.shortfall, LossSpec::cvar(0.9)));
    for (const auto& spec : {LossSpec::cvar(0.9), LossSpec::entropic(), LossSpec::power(3.0)}) {
      Claim shifted = x;
      for (double& v : shifted.payoff) v += 5.0;
      CHECK(accept_price(t, p, shifted, spec).price ==
            doctest::Approx(accept_price(t, p, x, spec).price + 5.0).epsilon(1e-9));
    }
  }

  TEST_CASE("bounded acceptance price") {
    // The unconstrained optimum holds no stock, so c = 0 does not bind.
    const auto t = trinomial();
    const auto p = single(t, uniform_step(3));
    const auto x = Claim::call(t, 100.0);
    const auto spec = LossSpec::cvar(0.9);
    const auto free = accept_price(t, p, x, spec);
    CHECK(free.strategy.at(0)[0] == doctest::Approx(0.0));
    CHECK(accept_price_bounded(t, p, x, spec, 0.0).price == doctest::Approx(free.price).epsilon(1e-8));
    CHECK(accept_price_bounded(t, p, x, spec, 1e4).price == doctest::Approx(free.price).epsilon(1e-8));
    CHECK_THROWS_AS(accept_price_bounded(t, p, x, spec, -1.0), ModelError);
    // On the binomial call the replicating hedge loses 10 on the down move.
    const auto b = binomial();
    const auto pb = single(b, {0.5, 0.5});
    const auto xb = Claim::call(b, 100.0);
    CHECK(accept_price_bounded(b, pb, xb, LossSpec::cvar(0.8), 0.0).price == doctest::Approx(12.5));
    CHECK(accept_price_bounded(b, pb, xb, LossSpec::cvar(0.8), 10.0).price == doctest::Approx(10.0));

    InstanceGenerator gen(31);
    for (int it = 0; it < 10; ++it) {
      const auto inst = gen.viable(spec_by_index(it), 2);
      double prev = kInfinity;
      for (double c : {0.0, 1.0, 5.0, 20.0, 100.0}) {
        const auto r = accept_price_bounded(inst.tree, inst.pset, inst.claim, inst.spec, c);
        REQUIRE(r.status == SolveStatus::optimal);
        CHECK(admissible(inst.tree, r.strategy, c + 1e-7, inst.pset.support()));
        CHECK(r.price <= prev + 1e-8);
        prev = r.price;
      }
      const double unbounded = accept_price(inst.tree, inst.pset, inst.claim, inst.spec).price;
      CHECK(prev >= unbounded - 1e-6);
    }
  }

  TEST_CASE("psi below phi, shortfall acceptable") {
    InstanceGenerator gen(32);
    for (int it = 0; it < 30; ++it) {
      const auto inst = gen.viable(spec_by_index(it));
      const auto psi = accept_price(inst.tree, inst.pset, inst.claim, inst.spec);
      const auto phi = superhedge_price(inst.tree, inst.pset, inst.claim);
      REQUIRE(psi.status == SolveStatus::optimal);
      CHECK(psi.price <= phi.price + 1e-8);
      CHECK(psi.shortfall_risk <= 1e-6);
      if (inst.spec.is_strict_cone()) CHECK(psi.price == phi.price);
    }
  }

  TEST_CASE("psi is monotone and convex") {
    InstanceGenerator gen(33);
    for (int it = 0; it < 15; ++it) {
      const auto inst = gen.viable(spec_by_index(it), 2);
      const auto& x = inst.claim;
      Claim y = x, hi = x;
      for (double& v : y.payoff) v = gen.uniform(-10.0, 30.0);
      for (double& v : hi.payoff) v += gen.uniform(0.0, 3.0);
      const double px = accept_price(inst.tree, inst.pset, x, inst.spec).price;
      const double py = accept_price(inst.tree, inst.pset, y, inst.spec).price;
      CHECK(px <= accept_price(inst.tree, inst.pset, hi, inst.spec).price + 1e-8);
      Claim mid = x;
      for (std::size_t i = 0; i < mid.payoff.size(); ++i) mid.payoff[i] = 0.5 * x.payoff[i] + 0.5 * y.payoff[i];
      CHECK(accept_price(inst.tree, inst.pset, mid, inst.spec).price <= 0.5 * px + 0.5 * py + 1e-8);
    }
  }

  TEST_CASE("inf-convolution examples") {
    const auto b = binomial();
    const auto p = single(b, {0.5, 0.5});
    const auto zero = infconv_check(b, p, Claim::constant(b, 0.0), LossSpec::strict_cone(), 10.0);
    CHECK(zero.psi_c == doctest::Approx(0.0));
    CHECK(zero.grid_value == doctest::Approx(0.0));

    const StrategyGrid fine{0.02, 40.0, 10.0, 0};
    const auto call = infconv_check(b, p, Claim::call(b, 100.0), LossSpec::cvar(0.8), 10.0, fine);
    CHECK(call.difference >= -1e-9);
    CHECK(call.difference <= 5e-3);

    const auto b2 = binomial(2);
    const auto p2 = single(b2, {0.5, 0.5});
    const auto two = infconv_check(b2, p2, Claim::call(b2, 100.0), LossSpec::cvar(0.8), 20.0);
    CHECK(two.difference >= -1e-9);
    CHECK(two.difference <= 2.0 * two.final_step + 1e-9);
  }

  TEST_CASE("brute-force oracle agrees on binomial trees") {
    InstanceGenerator gen(34);
    for (int it = 0; it < 6; ++it) {
      const auto spec = spec_by_index(it);
      const auto inst = gen.viable(spec, 2, 2, 2);
      if (strategy_coordinates(inst.tree, inst.pset) > 3) continue;
      const double psi = accept_price(inst.tree, inst.pset, inst.claim, spec).price;
      oracle::GridSpec grid;
      grid.z_step = 1.0;
      grid.z_radius = 25.0;
      grid.rounds = 6;
      grid.m_step = 1e-6;
      const auto b = oracle::brute_force_primal(inst.tree, inst.pset, inst.claim, spec, grid);
      CHECK(b.price >= psi - 1e-9);
      CHECK(b.price - psi <= 1e-4);
    }
  }
}
