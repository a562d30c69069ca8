#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ehnode/mdp.hpp"
#include "ehnode/policy.hpp"
#include "ehnode/rate.hpp"
#include "ehnode/stochastic.hpp"

namespace ehnode {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct NodeState {
  double q = 0.0;  // bits
  double e = 0.0;  // energy
  std::int64_t k = 0;
};

struct Buffers {
  double data_cap = kInf;
  double energy_cap = kInf;
  /// When > 0 the post-service backlog is rounded to a multiple of this.
  double queue_quantum = 0.0;
};

struct StepResult {
  NodeState next;
  double served = 0.0;           // bits removed by transmission
  double dropped_bits = 0.0;     // arrivals lost at data_cap
  double energy_overflow = 0.0;  // harvest lost at energy_cap
};

/// One slot of q' = min(cap, (q - g(hT))^+ + x), e' = min(cap, e - T - z + y).
/// Throws std::logic_error if T is negative or exceeds the stored energy, or
/// if z exceeds what is left after transmission.
StepResult step(const NodeState& state, double T, double x, double y, double h,
                const RateFunction& rf, const Buffers& buffers, double z = 0.0);

struct ScenarioConfig {
  std::string scenario_id = "custom";
  std::string figure_tag;
  DistributionSpec arrival{Exponential{1.0}};
  DistributionSpec harvest{Exponential{1.0}};
  std::optional<DistributionSpec> sensing;
  std::optional<DiscretePmf> fading;
  RateFunction rf = RateFunction::log_e(1.0);
  PolicySpec policy;
  double energy_cap = kInf;
  double data_cap = kInf;
  double queue_quantum = 0.0;
  std::int64_t horizon = 100'000;
  std::int64_t warmup = 10'000;
  int replications = 10;
  std::uint64_t seed = 1;
  /// Grid for MDP_OPTIMAL; the table is solved on demand by run().
  std::optional<MdpGrid> mdp;

  Buffers buffers() const { return {data_cap, energy_cap, queue_quantum}; }
  double ex_mean() const { return dist_mean(arrival); }
  double ey_mean() const { return dist_mean(harvest); }
  /// Throws ConfigError on an invalid scenario or policy/scenario pairing.
  void validate() const;
};

enum class Verdict { Stable, Unstable, Inconclusive };
std::string_view verdict_name(Verdict v);

inline constexpr double kUnstableSlope = 0.02;  // times E[X]
inline constexpr double kStableSlope = 0.005;   // times E[X]
inline constexpr double kDropUnstable = 0.01;   // persistent overflow

struct StabilityResult {
  Verdict verdict = Verdict::Inconclusive;
  double slope = 0.0;  // bits per slot over the last half
};

/// Least-squares growth rate of q over the last half of the trace, plus a
/// plateau test on four windowed means.
StabilityResult classify_stability(std::span<const double> trace, double ex_mean);

struct ReplicationMetrics {
  double mean_queue = 0.0;
  double mean_waste = 0.0;
  double drop_fraction = 0.0;
  double sensing_outage_fraction = 0.0;
  double slope = 0.0;
  Verdict verdict = Verdict::Inconclusive;
};

struct MetricsReport {
  double mean_queue = 0.0;
  double ci_half_width = 0.0;  // 95% normal interval across replications
  double mean_waste = 0.0;
  double drop_fraction = 0.0;
  double sensing_outage_fraction = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  double slope = 0.0;
  std::vector<ReplicationMetrics> replications;
};

/// Everything that happened in one slot, for observers and tests.
struct SlotRecord {
  NodeState before;
  double h = 1.0;
  double T = 0.0;
  double x = 0.0;  // arrivals actually admitted (0 on a sensing outage)
  double y = 0.0;
  double z = 0.0;  // sensing energy actually spent
  bool outage = false;
  double waste = 0.0;
  StepResult result;
};

using SlotObserver = std::function<void(const SlotRecord&)>;

/// Policy with any MDP table solved and attached.
PolicySpec prepare_policy(const ScenarioConfig& cfg);

/// One replication from (q, e) = (0, 0). Streams X, Y, Z, h use substreams
/// 8r, 8r+1, 8r+2, 8r+3 of cfg.seed. Appends q_k to `trace` when non-null.
ReplicationMetrics simulate_replication(const ScenarioConfig& cfg, const PolicySpec& policy,
                                        int replication, std::vector<double>* trace = nullptr,
                                        const SlotObserver& observer = {});

/// All replications, optionally on `jobs` threads; output is independent of
/// the thread count.
MetricsReport run(const ScenarioConfig& cfg, int jobs = 1);

struct HittingTimeReport {
  std::size_t returns = 0;
  double mean_tau = 0.0;
  double se_mean_tau = 0.0;
  double mean_tau2 = 0.0;
  double se_mean_tau2 = 0.0;
  bool inconclusive = true;
};

inline constexpr std::size_t kMinReturns = 30;

/// Return times to (0, energy_cap) starting there, pooled over replications.
/// A state counts as the target when q <= tol and e >= cap - tol.
HittingTimeReport hitting_time_stats(const ScenarioConfig& cfg, double tol = 1e-9);

}  // namespace ehnode
