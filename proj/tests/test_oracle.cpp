#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "robhedge/dual.hpp"
#include "robhedge/oracle.hpp"
#include "robhedge/primal.hpp"
#include "robhedge/risk.hpp"
#include "support.hpp"

using namespace robhedge;
using namespace testing;

namespace {

bool has_vertex(const std::vector<oracle::Vertex>& vs, const Vec& want) {
  return std::any_of(vs.begin(), vs.end(), [&](const oracle::Vertex& v) {
    for (std::size_t i = 0; i < want.size(); ++i)
      if (std::abs(v.leaf_probabilities[i] - want[i]) > 1e-12) return false;
    return true;
  });
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("brute force examples") {
    const auto b = binomial();
    const auto pb = single(b, {0.5, 0.5});
    oracle::GridSpec grid;
    const auto sc = oracle::brute_force_primal(b, pb, Claim::call(b, 100.0), LossSpec::strict_cone(), grid);
    CHECK(std::abs(sc.price - 10.0) <= grid.m_step);

    const auto cst = oracle::brute_force_primal(b, pb, Claim::constant(b, 3.0), LossSpec::cvar(0.5), grid);
    CHECK(std::abs(cst.price - 3.0) <= grid.m_step);
    CHECK(cst.positions[0] == 0.0);

    const auto t = trinomial();
    const auto pt = single(t, uniform_step(3));
    const auto cv = oracle::brute_force_primal(t, pt, Claim::call(t, 100.0), LossSpec::cvar(0.9), grid);
    CHECK(cv.price >= 20.0 / 2.7 - 1e-9);
    CHECK(cv.price - 20.0 / 2.7 <= 2.0 * grid.m_step);
  }

  TEST_CASE("brute force dominates the solver") {
    InstanceGenerator gen(51);
    for (int it = 0; it < 8; ++it) {
      const auto spec = spec_by_index(it);
      const auto inst = gen.viable(spec, 1, 3, 2);
      const double psi = accept_price(inst.tree, inst.pset, inst.claim, spec).price;
      const auto b = oracle::brute_force_primal(inst.tree, inst.pset, inst.claim, spec);
      CHECK(b.price >= psi - 1e-9);
    }
  }

  TEST_CASE("brute force guards") {
    const auto t = trinomial(3);
    const auto p = single(t, uniform_step(3));
    CHECK_THROWS_AS(oracle::brute_force_primal(t, p, Claim::call(t, 100.0), LossSpec::cvar(0.5)), ModelError);
  }

  TEST_CASE("vertex examples") {
    const auto b = binomial();
    const auto vb = oracle::enumerate_martingale_vertices(b, single(b, {0.5, 0.5}).support());
    REQUIRE(vb.size() == 1);
    CHECK(has_vertex(vb, {0.5, 0.5}));

    const auto t = trinomial();
    const auto vt = oracle::enumerate_martingale_vertices(t, single(t, uniform_step(3)).support());
    CHECK(vt.size() == 2);
    CHECK(has_vertex(vt, {0.5, 0.0, 0.5}));
    CHECK(has_vertex(vt, {0.0, 1.0, 0.0}));

    const auto b2 = binomial(2);
    const auto v2 = oracle::enumerate_martingale_vertices(b2, single(b2, {0.5, 0.5}).support());
    REQUIRE(v2.size() == 1);
    CHECK(has_vertex(v2, {0.25, 0.25, 0.25, 0.25}));
  }

  TEST_CASE("vertex maximum equals the superhedging dual") {
    InstanceGenerator gen(52);
    for (int it = 0; it < 20; ++it) {
      const auto inst = gen.viable(LossSpec::strict_cone(), 2);
      const auto vs = oracle::enumerate_martingale_vertices(inst.tree, inst.pset.support());
      double best = -kInfinity;
      for (const auto& v : vs) best = std::max(best, expectation(v.leaf_probabilities, inst.claim.payoff));
      const double dual = superhedge_dual(inst.tree, inst.pset, inst.claim).value;
      CHECK(best == doctest::Approx(dual).epsilon(1e-9));
    }
  }

  TEST_CASE("vertex dimension guard") {
    const auto t = ScenarioTree::generate({100.0}, {{1.3}, {1.1}, {1.0}, {0.9}, {0.7}}, 2);
    CHECK_THROWS_AS(oracle::enumerate_martingale_vertices(t, single(t, uniform_step(5)).support()), ModelError);
  }

  TEST_CASE("cvar_sorted examples") {
    const Vec u4{0.25, 0.25, 0.25, 0.25};
    const Vec x{1.0, 2.0, 3.0, 4.0};
    CHECK(oracle::cvar_sorted(u4, x, 0.5) == doctest::Approx(-1.5));
    CHECK(std::abs(oracle::cvar_sorted(u4, x, 0.999) - (-2.5)) <= 3e-3);
    for (double a : {0.1, 0.5, 0.9}) CHECK(oracle::cvar_sorted(Vec{1.0}, Vec{7.0}, a) == doctest::Approx(-7.0));
  }

  TEST_CASE("cvar oracle matches the oce") {
    InstanceGenerator gen(53);
    for (int it = 0; it < 100; ++it) {
      const std::size_t n = 2 + it % 6;
      const Vec p = gen.distribution(n), x = gen.outcomes(n);
      const double a = gen.uniform(0.05, 0.95);
      CHECK(std::abs(oce(p, x, LossSpec::cvar(a)).value - oracle::cvar_sorted(p, x, a)) <= 1e-8);
    }
  }

  TEST_CASE("naive robust oce matches") {
    InstanceGenerator gen(54);
    for (int it = 0; it < 20; ++it) {
      const auto spec = spec_by_index(it % 5);
      const std::vector<Vec> probs{gen.distribution(4), gen.distribution(4)};
      const Vec x = gen.outcomes(4);
      CHECK(std::abs(oracle::naive_robust_oce(probs, x, spec) - robust_oce(probs, x, spec).value) <= 1e-7);
    }
  }
}
