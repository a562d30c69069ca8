#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "ehnode/rate.hpp"

using namespace ehnode;

namespace {

// Active-set solution: with gains sorted descending and the top k states
// active, the water level is (B + sum p_i / h_i) / sum p_i over the top k.
double waterfill_oracle(const DiscretePmf& pmf, double budget) {
  std::vector<std::pair<double, double>> hp;
  for (std::size_t i = 0; i < pmf.values.size(); ++i)
    if (pmf.values[i] > 0.0 && pmf.probs[i] > 0.0) hp.emplace_back(pmf.values[i], pmf.probs[i]);
  std::sort(hp.begin(), hp.end(), [](auto a, auto b) { return a.first > b.first; });
  double sp = 0.0, sph = 0.0;
  for (std::size_t k = 0; k < hp.size(); ++k) {
    sp += hp[k].second;
    sph += hp[k].second / hp[k].first;
    const double level = (budget + sph) / sp;
    const bool next_inactive = k + 1 == hp.size() || level <= 1.0 / hp[k + 1].first;
    if (next_inactive) return 1.0 / level;
  }
  throw std::logic_error("unreachable");
}

}  // namespace

TEST_SUITE("rate") {
  TEST_CASE("evaluation and names") {
    CHECK(RateFunction::linear(10.0)(0.3) == doctest::Approx(3.0));
    CHECK(RateFunction::log_e(1.0)(10.0) == doctest::Approx(std::log(11.0)));
    CHECK(RateFunction::log2(1.0)(1.0) == doctest::Approx(1.0));
    CHECK(RateFunction::half_log(2.0)(1.5) == doctest::Approx(0.5 * std::log(4.0)));
    CHECK(RateFunction::linear(10.0).name() == "LINEAR(10)");
    CHECK(RateFunction::log_e(1.0).name() == "LOGE(1)");
    CHECK(RateFunction::log2(1.0).snr_scale() == 1.0);
    CHECK(RateFunction::linear(10.0).snr_scale() == 1.0);
    CHECK(RateFunction::log_e(0.5).snr_scale() == 0.5);
    CHECK_THROWS_AS(RateFunction(RateFamily::LogE, 0.0), std::invalid_argument);
  }

  TEST_CASE("inverse round trips and domain errors") {
    const RateFunction fams[] = {RateFunction::linear(10.0), RateFunction::log_e(1.0),
                                 RateFunction::log2(2.0), RateFunction::half_log(0.7)};
    for (const auto& rf : fams) {
      CAPTURE(rf.name());
      CHECK(g_eval(rf, 0.0) == 0.0);
      CHECK(g_inverse(rf, 0.0) == 0.0);
      for (double x : {1e-9, 0.01, 0.5, 1.0, 7.0, 40.0}) {
        CHECK(g_eval(rf, g_inverse(rf, x)) == doctest::Approx(x).epsilon(1e-12));
        CHECK(g_inverse(rf, g_eval(rf, x)) == doctest::Approx(x).epsilon(1e-12));
      }
      CHECK_THROWS_AS(g_eval(rf, -1.0), std::domain_error);
      CHECK_THROWS_AS(g_inverse(rf, -1e-3), std::domain_error);
      CHECK_THROWS_AS(g_eval(rf, std::nan("")), std::domain_error);
    }
    CHECK(std::isinf(g_inverse(RateFunction::log_e(1.0), 1e4)));
  }

  TEST_CASE("monotone and concave on a grid") {
    const RateFunction fams[] = {RateFunction::log_e(1.0), RateFunction::log2(1.0),
                                 RateFunction::half_log(3.0)};
    for (const auto& rf : fams) {
      for (double x = 0.0; x < 20.0; x += 0.25) {
        CHECK(rf(x + 0.25) > rf(x));
        CHECK(rf(x + 0.25) - rf(x) >= rf(x + 0.5) - rf(x + 0.25));
      }
    }
  }

  TEST_CASE("water level on the four-state pmf") {
    const DiscretePmf pmf{{0.1, 0.5, 1.0, 2.2}, {0.1, 0.3, 0.4, 0.2}};
    const double h0 = waterfill_level(pmf, 0.99);
    CHECK(std::abs(h0 - waterfill_oracle(pmf, 0.99)) < 1e-9);
    CHECK(std::abs(h0 - 0.4325) < 1e-4);
    CHECK(std::abs(waterfill_power(pmf, h0) - 0.99) < 1e-9);
  }

  TEST_CASE("water level on random pmfs") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 1 + static_cast<int>(u(rng) * 6);
      DiscretePmf pmf;
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        pmf.values.push_back(0.05 + 3.0 * u(rng));
        pmf.probs.push_back(0.05 + u(rng));
        total += pmf.probs.back();
      }
      for (double& p : pmf.probs) p /= total;
      double s = 0.0;
      for (int i = 0; i + 1 < n; ++i) s += pmf.probs[static_cast<std::size_t>(i)];
      pmf.probs.back() = 1.0 - s;
      const double budget = 0.01 + 5.0 * u(rng);
      const double h0 = waterfill_level(pmf, budget);
      CHECK(std::abs(waterfill_power(pmf, h0) - budget) < 1e-9);
      CHECK(std::abs(1.0 / h0 - 1.0 / waterfill_oracle(pmf, budget)) < 1e-9 * (1.0 + 1.0 / h0));
    }
  }

  TEST_CASE("water level errors") {
    CHECK_THROWS_AS(waterfill_level(DiscretePmf{{0.0}, {1.0}}, 1.0), std::domain_error);
    CHECK_THROWS_AS(waterfill_level(DiscretePmf{{1.0}, {1.0}}, 0.0), std::domain_error);
  }
}
