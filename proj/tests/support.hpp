#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ehnode/sim.hpp"

namespace testsupport {

using namespace ehnode;

struct InvariantTally {
  long slots = 0;
  long negative_q = 0;
  long energy_range = 0;
  long infeasible_t = 0;
  double worst_conservation = 0.0;
  bool deterministic = true;
  std::string first_failure;

  bool ok() const {
    return negative_q == 0 && energy_range == 0 && infeasible_t == 0 &&
           worst_conservation <= 1e-9 && deterministic;
  }
};

/// Random scenario for a policy kind; fading, sensing and caps vary by seed.
inline ScenarioConfig random_scenario(PolicyKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 7919 + static_cast<std::uint64_t>(kind));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScenarioConfig cfg;
  cfg.seed = seed;
  const double ey = 0.5 + 4.0 * u(rng);
  const int pick = static_cast<int>(u(rng) * 4);
  switch (pick) {
    case 0: cfg.harvest = DistributionSpec{Exponential{ey}}; break;
    case 1: cfg.harvest = DistributionSpec{Erlang{5, ey}}; break;
    case 2: cfg.harvest = staggered_hyperexponential(ey); break;
    default: cfg.harvest = DistributionSpec{Uniform{0.0, 2.0 * ey}}; break;
  }
  cfg.rf = u(rng) < 0.5 ? RateFunction::linear(1.0 + 9.0 * u(rng)) : RateFunction::log_e(1.0);
  const double cap = cfg.rf(ey);
  cfg.arrival = DistributionSpec{Exponential{cap * (0.3 + 1.0 * u(rng))}};
  cfg.fading = DiscretePmf{{0.1, 0.5, 1.0, 2.2}, {0.1, 0.3, 0.4, 0.2}};
  if (u(rng) < 0.5 && !needs_fading(kind)) cfg.fading.reset();
  if (u(rng) < 0.5) cfg.energy_cap = 2.0 * ey + 20.0 * u(rng);
  if (u(rng) < 0.5) cfg.data_cap = 5.0 + 50.0 * u(rng);
  if (u(rng) < 0.3) cfg.sensing = DistributionSpec{Deterministic{0.2 * ey * u(rng)}};
  cfg.policy = PolicySpec::make(kind);
  if (kind == PolicyKind::ConstantPower) cfg.policy.c_power = ey * (0.2 + 0.8 * u(rng));
  if (kind == PolicyKind::MdpTable) {
    // Grid-aligned integer sources so a table can be solved.
    const double p0 = 0.2 + 0.5 * u(rng);
    cfg.arrival = DistributionSpec{DiscretePmf{{0, 1, 2}, {p0, 0.5 * (1 - p0), 0.5 * (1 - p0)}}};
    cfg.harvest = DistributionSpec{DiscretePmf{{0, 1, 2, 3}, {0.3, 0.3, 0.2, 0.2}}};
    cfg.rf = u(rng) < 0.5 ? RateFunction::linear(1.0) : RateFunction::log2(1.0);
    cfg.fading.reset();
    cfg.energy_cap = 12;
    cfg.data_cap = 12;
    cfg.queue_quantum = 1;
    cfg.mdp = MdpGrid{13, 13, 1.0, 1.0, 0.0};
  }
  cfg.horizon = 10'000;
  cfg.warmup = 1'000;
  cfg.replications = 1;
  return cfg;
}

/// Steps one random scenario, checking every slot, and reruns it to compare
/// metrics bit for bit.
inline void check_invariants(const ScenarioConfig& cfg, InvariantTally& tally) {
  const PolicySpec policy = prepare_policy(cfg);
  double sum_t = 0.0, sum_z = 0.0, sum_y = 0.0, sum_over = 0.0;
  double e_start = 0.0, e_end = 0.0;
  bool first = true;
  auto note = [&](const char* what) {
    if (tally.first_failure.empty())
      tally.first_failure = std::string(what) + " policy=" + std::string(cfg.policy.name()) +
                            " seed=" + std::to_string(cfg.seed);
  };
  const SlotObserver observer = [&](const SlotRecord& r) {
    ++tally.slots;
    if (first) {
      e_start = r.before.e;
      first = false;
    }
    const NodeState& n = r.result.next;
    if (n.q < 0.0 || r.before.q < 0.0) {
      ++tally.negative_q;
      note("negative q");
    }
    if (n.e < 0.0 || n.e > cfg.energy_cap) {
      ++tally.energy_range;
      note("energy out of range");
    }
    if (r.T < 0.0 || r.T > r.before.e) {
      ++tally.infeasible_t;
      note("infeasible T");
    }
    sum_t += r.T;
    sum_z += r.z;
    sum_y += r.y;
    sum_over += r.result.energy_overflow;
    e_end = n.e;
  };
  const ReplicationMetrics a = simulate_replication(cfg, policy, 0, nullptr, observer);
  const double imbalance = std::abs(sum_t + sum_z + (e_end - e_start) + sum_over - sum_y);
  const double scale = std::max(1.0, sum_y);
  tally.worst_conservation = std::max(tally.worst_conservation, imbalance / scale);
  if (imbalance / scale > 1e-9) note("energy conservation");

  const ReplicationMetrics b = simulate_replication(cfg, policy, 0);
  const bool same = a.mean_queue == b.mean_queue && a.mean_waste == b.mean_waste &&
                    a.drop_fraction == b.drop_fraction &&
                    a.sensing_outage_fraction == b.sensing_outage_fraction;
  if (!same) {
    tally.deterministic = false;
    note("determinism");
  }
}

/// Tiny fully discrete instance: q, e in {0..5}, linear rate 1, integer
/// arrivals and harvests, Greedy.
struct TinyChain {
  static constexpr int kMax = 5;
  std::vector<double> px{0.5, 0.3, 0.2};
  std::vector<double> py{0.3, 0.4, 0.3};

  ScenarioConfig scenario(std::int64_t horizon, std::uint64_t seed) const {
    ScenarioConfig cfg;
    cfg.arrival = DistributionSpec{DiscretePmf{{0, 1, 2}, px}};
    cfg.harvest = DistributionSpec{DiscretePmf{{0, 1, 2}, py}};
    cfg.rf = RateFunction::linear(1.0);
    cfg.policy = PolicySpec::make(PolicyKind::Greedy);
    cfg.data_cap = kMax;
    cfg.energy_cap = kMax;
    cfg.queue_quantum = 1.0;
    cfg.horizon = horizon;
    cfg.warmup = 0;
    cfg.replications = 1;
    cfg.seed = seed;
    return cfg;
  }

  /// Stationary law of (q, e) by powering the dense transition matrix.
  std::vector<double> exact_stationary() const {
    const int n = (kMax + 1) * (kMax + 1);
    std::vector<double> P(static_cast<std::size_t>(n * n), 0.0);
    for (int q = 0; q <= kMax; ++q)
      for (int e = 0; e <= kMax; ++e) {
        const int t = std::min(q, e);
        for (std::size_t x = 0; x < px.size(); ++x)
          for (std::size_t y = 0; y < py.size(); ++y) {
            const int q2 = std::min(kMax, q - t + static_cast<int>(x));
            const int e2 = std::min(kMax, e - t + static_cast<int>(y));
            P[static_cast<std::size_t>((q * (kMax + 1) + e) * n + q2 * (kMax + 1) + e2)] +=
                px[x] * py[y];
          }
      }
    std::vector<double> pi(static_cast<std::size_t>(n), 0.0), next(pi.size());
    pi[0] = 1.0;
    for (int it = 0; it < 20000; ++it) {
      std::fill(next.begin(), next.end(), 0.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          next[static_cast<std::size_t>(j)] +=
              pi[static_cast<std::size_t>(i)] * P[static_cast<std::size_t>(i * n + j)];
      pi.swap(next);
    }
    return pi;
  }

  /// Empirical occupancy of (q, e) over the simulated slots.
  std::vector<double> simulated(std::int64_t horizon, std::uint64_t seed) const {
    const ScenarioConfig cfg = scenario(horizon, seed);
    std::vector<double> counts(static_cast<std::size_t>((kMax + 1) * (kMax + 1)), 0.0);
    const SlotObserver obs = [&](const SlotRecord& r) {
      const int q = static_cast<int>(std::lround(r.before.q));
      const int e = static_cast<int>(std::lround(r.before.e));
      counts[static_cast<std::size_t>(q * (kMax + 1) + e)] += 1.0;
    };
    simulate_replication(cfg, prepare_policy(cfg), 0, nullptr, obs);
    for (double& c : counts) c /= static_cast<double>(horizon);
    return counts;
  }
};

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace testsupport
