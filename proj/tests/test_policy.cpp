#include <cmath>
#include <memory>
#include <stdexcept>

#include "doctest.h"
#include "ehnode/mdp.hpp"
#include "ehnode/policy.hpp"

using namespace ehnode;

namespace {

DecisionContext ctx(double q, double e, RateFunction rf = RateFunction::log_e(1.0),
                    double ey = 10.0) {
  DecisionContext c;
  c.q = q;
  c.e = e;
  c.ey = ey;
  c.rf = rf;
  return c;
}

double decide_kind(PolicyKind k, const DecisionContext& c) { return decide(PolicySpec::make(k), c); }

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("names round trip") {
    for (auto k : {PolicyKind::TO, PolicyKind::Greedy, PolicyKind::MTO, PolicyKind::Unbuffered,
                   PolicyKind::UnfadedTO, PolicyKind::FadingTOLinear, PolicyKind::WF,
                   PolicyKind::MWF, PolicyKind::ConstantPower, PolicyKind::MdpTable})
      CHECK(policy_kind_from_name(policy_name(k)) == k);
    CHECK(policy_name(PolicyKind::MdpTable) == "MDP_OPTIMAL");
    CHECK_THROWS_AS(policy_kind_from_name("BOGUS"), std::invalid_argument);
  }

  TEST_CASE("TO spends E[Y] - eps, clipped to stored energy") {
    CHECK(decide_kind(PolicyKind::TO, ctx(5.0, 50.0)) == doctest::Approx(9.9));
    CHECK(decide_kind(PolicyKind::TO, ctx(5.0, 3.0)) == 3.0);
    PolicySpec p = PolicySpec::make(PolicyKind::TO);
    p.epsilon = 0.5;
    CHECK(decide(p, ctx(0.0, 50.0)) == doctest::Approx(9.5));
    CHECK(decide_kind(PolicyKind::UnfadedTO, ctx(5.0, 50.0)) == doctest::Approx(9.9));
  }

  TEST_CASE("Greedy drains exactly the backlog and ignores the channel") {
    auto c = ctx(2.0, 50.0);
    CHECK(decide_kind(PolicyKind::Greedy, c) == doctest::Approx(std::expm1(2.0)));
    c.h = 0.1;
    CHECK(decide_kind(PolicyKind::Greedy, c) == doctest::Approx(std::expm1(2.0)));
    CHECK(decide_kind(PolicyKind::Greedy, ctx(2.0, 1.0)) == 1.0);
    CHECK(decide_kind(PolicyKind::Greedy, ctx(0.0, 1.0)) == 0.0);
    CHECK(decide_kind(PolicyKind::Greedy, ctx(1e5, 7.0)) == 7.0);
  }

  TEST_CASE("MTO boost and caps") {
    // min(f(q), e, 0.99 (E[Y] + 0.001 (e - 0.1 q)^+))
    const auto c = ctx(100.0, 40.0);
    const double expect = std::min(std::expm1(100.0), 0.99 * (10.0 + 0.001 * (40.0 - 10.0)));
    CHECK(decide_kind(PolicyKind::MTO, c) == doctest::Approx(expect));
    CHECK(decide_kind(PolicyKind::MTO, ctx(1.0, 40.0)) == doctest::Approx(std::expm1(1.0)));
    CHECK(decide_kind(PolicyKind::MTO, ctx(500.0, 40.0)) == doctest::Approx(9.9));
  }

  TEST_CASE("Unbuffered spends last slot's harvest") {
    auto c = ctx(3.0, 5.0);
    c.y_prev = 2.5;
    CHECK(decide_kind(PolicyKind::Unbuffered, c) == 2.5);
    c.y_prev = 9.0;
    CHECK(decide_kind(PolicyKind::Unbuffered, c) == 5.0);
  }

  TEST_CASE("fading TO for linear g transmits only in the top state") {
    auto c = ctx(10.0, 100.0, RateFunction::linear(10.0), 1.0);
    c.h_max = 2.2;
    c.p_h_max = 0.2;
    c.h = 2.2;
    CHECK(decide_kind(PolicyKind::FadingTOLinear, c) == doctest::Approx(0.99 / 0.2));
    c.h = 1.0;
    CHECK(decide_kind(PolicyKind::FadingTOLinear, c) == 0.0);
  }

  TEST_CASE("water-filling allocations") {
    auto c = ctx(1e6, 100.0, RateFunction::log_e(1.0), 1.0);
    c.h0 = 0.4;
    c.h = 2.0;
    CHECK(decide_kind(PolicyKind::WF, c) == doctest::Approx(2.5 - 0.5));
    c.h = 0.1;
    CHECK(decide_kind(PolicyKind::WF, c) == 0.0);
    c.h = 0.0;
    CHECK(decide_kind(PolicyKind::WF, c) == 0.0);
    c.h = 2.0;
    // MWF: min(f(q), (alloc + 0.001 (e - 0.1 q)^+)^+); the boost vanishes for huge q.
    CHECK(decide_kind(PolicyKind::MWF, c) == doctest::Approx(2.0));
    c.q = 0.5;
    CHECK(decide_kind(PolicyKind::MWF, c) == doctest::Approx(std::expm1(0.5)));
    c.q = 100.0;
    c.e = 50.0;
    CHECK(decide_kind(PolicyKind::MWF, c) == doctest::Approx(2.0 + 0.001 * 40.0));
  }

  TEST_CASE("constant power") {
    PolicySpec p = PolicySpec::make(PolicyKind::ConstantPower);
    p.c_power = 0.5;
    CHECK(decide(p, ctx(0.0, 2.0)) == 0.5);
    CHECK(decide(p, ctx(0.0, 0.2)) == 0.2);
  }

  TEST_CASE("table lookup rounds q and floors e") {
    auto t = std::make_shared<PolicyTable>();
    t->n_q = 3;
    t->n_e = 3;
    t->action = {0, 0, 0, 0, 1, 1, 0, 1, 2};
    t->value.assign(9, 0.0);
    PolicySpec p = PolicySpec::make(PolicyKind::MdpTable);
    p.table = t;
    CHECK(decide(p, ctx(1.6, 2.0, RateFunction::linear(1.0))) == 2.0);
    CHECK(decide(p, ctx(1.6, 1.9, RateFunction::linear(1.0))) == 1.0);
    CHECK(decide(p, ctx(1.4, 2.0, RateFunction::linear(1.0))) == 1.0);
    CHECK_THROWS(decide(p, ctx(5.0, 1.0, RateFunction::linear(1.0))));
    CHECK_THROWS_AS(PolicySpec::make(PolicyKind::MdpTable).validate(), std::invalid_argument);
  }

  TEST_CASE("decisions always lie in [0, e]") {
    const PolicyKind kinds[] = {PolicyKind::TO,  PolicyKind::Greedy, PolicyKind::MTO,
                                PolicyKind::Unbuffered, PolicyKind::WF, PolicyKind::MWF};
    for (auto k : kinds) {
      for (double q : {0.0, 0.3, 4.0, 1e4}) {
        for (double e : {0.0, 0.2, 3.0, 80.0}) {
          auto c = ctx(q, e, RateFunction::log_e(1.0), 1.0);
          c.h0 = 0.43;
          c.h = 1.0;
          c.y_prev = 1.7;
          const double t = decide_kind(k, c);
          CHECK(t >= 0.0);
          CHECK(t <= e);
        }
      }
    }
  }

  TEST_CASE("wasted energy") {
    const auto rf = RateFunction::linear(10.0);
    auto c = ctx(3.0, 10.0, rf, 1.0);
    const auto p = PolicySpec::make(PolicyKind::TO);
    CHECK(wasted_energy(p, c, 0.5) == doctest::Approx(0.2));
    CHECK(wasted_energy(p, c, 0.2) == 0.0);
    c.h = 0.0;
    CHECK(wasted_energy(p, c, 0.4) == 0.4);
  }
}
