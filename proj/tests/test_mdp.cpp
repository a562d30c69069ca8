#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "ehnode/errors.hpp"
#include "ehnode/mdp.hpp"
#include "support.hpp"

using namespace ehnode;

namespace {

MdpModel fig2_model() {
  return build_model(MdpGrid{51, 51, 1.0, 1.0, 0.0}, truncated_poisson_with_mean(0.7, 5),
                     truncated_poisson_with_mean(1.0, 5), RateFunction::log2(1.0));
}

MdpModel linear_small_model(double penalty) {
  return build_model(MdpGrid{21, 21, 10.0, 1.0, penalty},
                     DistributionSpec{DiscretePmf{{0, 10, 20}, {0.5, 0.3, 0.2}}},
                     DistributionSpec{DiscretePmf{{0, 1, 2}, {0.4, 0.3, 0.3}}},
                     RateFunction::linear(10.0));
}

MdpModel tiny_model() {
  return build_model(MdpGrid{3, 3, 1.0, 1.0, 0.0},
                     DistributionSpec{DiscretePmf{{0, 1}, {0.6, 0.4}}},
                     DistributionSpec{DiscretePmf{{0, 1}, {0.5, 0.5}}}, RateFunction::log2(1.0));
}

Eigen::MatrixXd dense_kernel(const MdpModel& m, const std::vector<int>& policy) {
  const int n = m.states();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int q = 0; q < m.n_q(); ++q)
    for (int e = 0; e < m.n_e(); ++e) {
      const int s = m.index(q, e);
      for (const auto& [t, p] : m.transition_row(q, e, policy[static_cast<std::size_t>(s)]))
        P(s, t) += p;
    }
  return P;
}

Eigen::VectorXd stage_costs(const MdpModel& m, const std::vector<int>& policy) {
  Eigen::VectorXd c(m.states());
  for (int q = 0; q < m.n_q(); ++q)
    for (int e = 0; e < m.n_e(); ++e)
      c[m.index(q, e)] = m.stage_cost(q, policy[static_cast<std::size_t>(m.index(q, e))]);
  return c;
}

/// Calls f on every deterministic stationary policy.
template <class F>
void for_each_policy(const MdpModel& m, F&& f) {
  std::vector<int> policy(static_cast<std::size_t>(m.states()), 0);
  while (true) {
    f(policy);
    int s = 0;
    for (; s < m.states(); ++s) {
      const int e = s % m.n_e();
      auto& a = policy[static_cast<std::size_t>(s)];
      if (a < e) {
        ++a;
        break;
      }
      a = 0;
    }
    if (s == m.states()) return;
  }
}

}  // namespace

TEST_SUITE("mdp") {
  TEST_CASE("kernel rows sum to one on the 51x51 model") {
    const MdpModel m = fig2_model();
    double worst = 0.0;
    for (int q = 0; q < m.n_q(); ++q)
      for (int e = 0; e < m.n_e(); ++e)
        for (int a = 0; a <= e; ++a) {
          double s = 0.0;
          for (const auto& [t, p] : m.transition_row(q, e, a)) s += p;
          worst = std::max(worst, std::abs(s - 1.0));
        }
    CHECK(worst < 1e-12);
  }

  TEST_CASE("kernel examples") {
    const MdpModel m = fig2_model();
    // No service: pure arrival shift.
    const auto row = m.transition_row(10, 5, 0);
    const auto& px = m.arrival_pmf();
    for (const auto& [t, p] : row) {
      const int q2 = t / m.n_e();
      CHECK(q2 >= 10);
      CHECK(q2 <= 15);
    }
    double mass_q12 = 0.0;
    for (const auto& [t, p] : row)
      if (t / m.n_e() == 12) mass_q12 += p;
    CHECK(mass_q12 == doctest::Approx(px[2]));

    const MdpModel still = build_model(MdpGrid{11, 11, 1.0, 1.0, 0.0},
                                       DistributionSpec{Deterministic{0.0}},
                                       DistributionSpec{Deterministic{0.0}}, RateFunction::log2(1.0));
    const auto det = still.transition_row(7, 3, 3);  // log2(4) = 2 bits served
    REQUIRE(det.size() == 1);
    CHECK(det[0].first == still.index(5, 0));
    CHECK(det[0].second == 1.0);
  }

  TEST_CASE("grid alignment is enforced") {
    CHECK_THROWS_AS(build_model(MdpGrid{}, DistributionSpec{Exponential{1.0}},
                                truncated_poisson_with_mean(1.0, 5), RateFunction::log2(1.0)),
                    ConfigError);
    CHECK_THROWS_AS(build_model(MdpGrid{11, 11, 1.0, 1.0, 0.0},
                                DistributionSpec{DiscretePmf{{0.0, 0.5}, {0.5, 0.5}}},
                                truncated_poisson_with_mean(1.0, 5), RateFunction::log2(1.0)),
                    ConfigError);
  }

  TEST_CASE("degenerate value functions") {
    // Nothing ever arrives: every state has zero cost from then on.
    const MdpModel empty = build_model(MdpGrid{5, 5, 1.0, 1.0, 0.0},
                                       DistributionSpec{Deterministic{0.0}},
                                       DistributionSpec{DiscretePmf{{0, 1}, {0.5, 0.5}}},
                                       RateFunction::linear(1.0));
    const auto vf = value_iterate(empty, 0.9);
    for (int e = 0; e < 5; ++e) CHECK(vf.value_at(0, e) == 0.0);

    // One state losing one bit per slot at cost 1: geometric series.
    const MdpModel one = build_model(MdpGrid{1, 1, 1.0, 1.0, 1.0},
                                     DistributionSpec{Deterministic{1.0}},
                                     DistributionSpec{Deterministic{0.0}}, RateFunction::linear(1.0));
    CHECK(value_iterate(one, 0.9).value_at(0, 0) == doctest::Approx(10.0).epsilon(1e-8));
    const auto pi = average_cost_solve(one, AverageCostMethod::PolicyIteration);
    const auto rvi = average_cost_solve(one, AverageCostMethod::RelativeValueIteration);
    CHECK(pi.status == SolveStatus::Ok);
    CHECK(pi.gain == doctest::Approx(1.0));
    CHECK(rvi.gain == doctest::Approx(1.0));
    CHECK_THROWS_AS(value_iterate(one, 1.0), std::invalid_argument);
  }

  TEST_CASE("value iteration contracts by alpha per sweep") {
    const MdpModel m = tiny_model();
    const auto vf = value_iterate(m, 0.9);
    for (std::size_t k = 1; k < vf.residuals.size(); ++k)
      CHECK(vf.residuals[k] <= 0.9 * vf.residuals[k - 1] * (1.0 + 1e-6) + 1e-15);
  }

  TEST_CASE("brute force over every deterministic policy") {
    const MdpModel m = tiny_model();
    const int n = m.states();
    const double alpha = 0.9;
    Eigen::VectorXd best = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    double best_gain = std::numeric_limits<double>::infinity();
    int count = 0;
    for_each_policy(m, [&](const std::vector<int>& policy) {
      ++count;
      const Eigen::MatrixXd P = dense_kernel(m, policy);
      const Eigen::VectorXd c = stage_costs(m, policy);
      const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - alpha * P;
      best = best.cwiseMin(A.partialPivLu().solve(c));
      Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(n, 1.0 / n);
      for (int k = 0; k < 5000; ++k) pi = 0.5 * (pi + pi * P);
      best_gain = std::min(best_gain, pi.dot(c));
    });
    CHECK(count == 216);
    const auto vf = value_iterate(m, alpha, SolverOptions{1e-12});
    for (int s = 0; s < n; ++s) CHECK(std::abs(vf.value[static_cast<std::size_t>(s)] - best[s]) < 1e-9);
    const auto pi = average_cost_solve(m, AverageCostMethod::PolicyIteration);
    CHECK(std::abs(pi.gain - best_gain) < 1e-9);
  }

  TEST_CASE("average-cost methods agree") {
    const MdpModel m = fig2_model();
    const auto pi = average_cost_solve(m, AverageCostMethod::PolicyIteration);
    const auto rvi = average_cost_solve(m, AverageCostMethod::RelativeValueIteration,
                                        SolverOptions{1e-10});
    REQUIRE(pi.status == SolveStatus::Ok);
    REQUIRE(rvi.status == SolveStatus::Ok);
    CHECK(std::abs(pi.gain - rvi.gain) < 1e-6);
    for (int q = 0; q < m.n_q(); ++q)
      for (int e = 0; e < m.n_e(); ++e) CHECK(pi.table.action_at(q, e) <= e);
  }

  TEST_CASE("multichain structure is reported") {
    // No arrivals and no harvest: every (q, 0) reached under spend-all is absorbing.
    const MdpModel m = build_model(MdpGrid{4, 4, 1.0, 1.0, 0.0},
                                   DistributionSpec{Deterministic{0.0}},
                                   DistributionSpec{Deterministic{0.0}}, RateFunction::linear(0.5));
    CHECK(average_cost_solve(m, AverageCostMethod::PolicyIteration).status ==
          SolveStatus::Multichain);
  }

  TEST_CASE("greedy is optimal for linear g with the drop penalty") {
    const MdpModel m = linear_small_model(1000.0);
    CHECK(greedy_mismatches(m, value_iterate(m, 0.9)).empty());
    const auto avg = average_cost_solve(m, AverageCostMethod::PolicyIteration);
    CHECK(greedy_mismatches(m, avg.table).empty());
    // Without it, the solver trades drops at the ceiling for lower backlog.
    CHECK_FALSE(greedy_mismatches(linear_small_model(0.0), value_iterate(linear_small_model(0.0), 0.99)).empty());
  }

  TEST_CASE("monotone value functions and vanishing discount") {
    const MdpModel m = fig2_model();
    const auto avg = average_cost_solve(m, AverageCostMethod::PolicyIteration);
    for (double alpha : {0.9, 0.99}) CHECK(structure_checks(value_iterate(m, alpha)).ok());
    const auto pts = vanishing_discount(m, {0.9, 0.99}, avg.gain);
    CHECK(pts[1].relative_gap < pts[0].relative_gap);

    PolicyTable bad;
    bad.n_q = 2;
    bad.n_e = 2;
    bad.value = {1.0, 2.0, 0.5, 0.4};
    bad.action = {0, 0, 0, 0};
    const auto r = structure_checks(bad);
    CHECK(r.q_violations.size() == 2);
    CHECK(r.e_violations.size() == 1);
  }

  TEST_CASE("stationary distribution matches dense powering") {
    testsupport::TinyChain chain;
    const MdpModel m = build_model(MdpGrid{6, 6, 1.0, 1.0, 0.0},
                                   DistributionSpec{DiscretePmf{{0, 1, 2}, chain.px}},
                                   DistributionSpec{DiscretePmf{{0, 1, 2}, chain.py}},
                                   RateFunction::linear(1.0));
    PolicyTable greedy;
    greedy.n_q = greedy.n_e = 6;
    greedy.value.assign(36, 0.0);
    for (int q = 0; q < 6; ++q)
      for (int e = 0; e < 6; ++e) greedy.action.push_back(m.greedy_action(q, e));
    const auto a = stationary_distribution(m, greedy);
    const auto b = chain.exact_stationary();
    CHECK(testsupport::total_variation(a, b) < 1e-9);
    const double occ = boundary_occupancy(m, greedy);
    CHECK(occ >= 0.0);
    CHECK(occ <= 1.0);
  }

  TEST_CASE("policy table CSV") {
    PolicyTable t;
    t.n_q = 1;
    t.n_e = 2;
    t.action = {0, 1};
    t.value = {0.5, 0.25};
    std::ostringstream os;
    write_policy_table_csv(os, t);
    CHECK(os.str() == "q_level,e_level,action,value\n0,0,0,0.5\n0,1,1,0.25\n");
  }
}
