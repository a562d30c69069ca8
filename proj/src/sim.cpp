#include "ehnode/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "ehnode/errors.hpp"

namespace ehnode {

namespace {

enum Process : std::uint64_t { kArrival = 0, kHarvest = 1, kSensing = 2, kFading = 3 };

std::uint64_t substream(int replication, Process p) {
  return static_cast<std::uint64_t>(replication) * 8 + p;
}

struct FadingSummary {
  double h_max = 1.0;
  double p_h_max = 1.0;
};

FadingSummary summarize(const std::optional<DiscretePmf>& fading) {
  FadingSummary s;
  if (!fading) return s;
  s.h_max = -1.0;
  for (std::size_t i = 0; i < fading->values.size(); ++i) {
    if (fading->probs[i] > 0.0 && fading->values[i] > s.h_max) {
      s.h_max = fading->values[i];
      s.p_h_max = fading->probs[i];
    }
  }
  return s;
}

double water_level(const ScenarioConfig& cfg, const PolicySpec& policy) {
  if (policy.kind != PolicyKind::WF && policy.kind != PolicyKind::MWF) return 0.0;
  DiscretePmf scaled = *cfg.fading;
  for (double& h : scaled.values) h *= cfg.rf.snr_scale();
  const double ey = cfg.ey_mean();
  return waterfill_level(scaled, ey - policy.resolved_epsilon(ey));
}

double mean_of(const std::vector<ReplicationMetrics>& reps, double ReplicationMetrics::*field) {
  double s = 0.0;
  for (const auto& r : reps) s += r.*field;
  return s / static_cast<double>(reps.size());
}

}  // namespace

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "STABLE";
    case Verdict::Unstable: return "UNSTABLE";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

StepResult step(const NodeState& state, double T, double x, double y, double h,
                const RateFunction& rf, const Buffers& buffers, double z) {
  if (!(T >= 0.0) || T > state.e)
    throw std::logic_error("step: transmit energy outside [0, e]");
  if (!(z >= 0.0) || z > state.e - T)
    throw std::logic_error("step: sensing energy exceeds what is left");
  StepResult r;
  double post = std::max(state.q - rf(h * T), 0.0);
  if (buffers.queue_quantum > 0.0)
    post = std::floor(post / buffers.queue_quantum + 0.5) * buffers.queue_quantum;
  r.served = state.q - post;
  double q = post + x;
  if (q > buffers.data_cap) {
    r.dropped_bits = q - buffers.data_cap;
    q = buffers.data_cap;
  }
  double e = state.e - T - z + y;
  if (e > buffers.energy_cap) {
    r.energy_overflow = e - buffers.energy_cap;
    e = buffers.energy_cap;
  }
  r.next = {q, e, state.k + 1};
  return r;
}

void ScenarioConfig::validate() const {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (warmup < 0 || warmup >= horizon) throw ConfigError("warmup must lie in [0, horizon)");
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (!(energy_cap > 0.0)) throw ConfigError("energy_cap must be > 0");
  if (!(data_cap > 0.0)) throw ConfigError("data_cap must be > 0");
  if (!(queue_quantum >= 0.0) || !std::isfinite(queue_quantum))
    throw ConfigError("queue_quantum must be >= 0");
  if (fading) DistributionSpec{*fading};
  if (needs_fading(policy.kind) && !fading)
    throw ConfigError(std::string(policy.name()) + " requires a fading distribution");
  if (policy.kind == PolicyKind::MdpTable && !policy.table) {
    if (!mdp) throw ConfigError("MDP_OPTIMAL requires an mdp grid");
    if (data_cap > (mdp->n_q - 1) * mdp->q_step || energy_cap > (mdp->n_e - 1) * mdp->e_step)
      throw ConfigError("MDP_OPTIMAL: buffers exceed the mdp grid");
  }
  try {
    if (policy.kind != PolicyKind::MdpTable || policy.table) policy.validate();
    else {
      PolicySpec copy = policy;
      copy.kind = PolicyKind::TO;
      copy.validate();
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const double ey = ey_mean();
  if (policy.epsilon && *policy.epsilon >= ey &&
      (policy.kind == PolicyKind::TO || policy.kind == PolicyKind::UnfadedTO ||
       policy.kind == PolicyKind::FadingTOLinear || policy.kind == PolicyKind::WF))
    throw ConfigError("epsilon must be smaller than E[Y]");
}

StabilityResult classify_stability(std::span<const double> trace, double ex_mean) {
  StabilityResult r;
  const std::size_t n = trace.size();
  if (n < 8) return r;
  const std::size_t start = n / 2;
  const auto window = trace.subspan(start);
  const double m = static_cast<double>(window.size());

  // Least squares with centred abscissa.
  const double kbar = 0.5 * (m - 1.0);
  double qbar = 0.0;
  for (double q : window) qbar += q;
  qbar /= m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < window.size(); ++i) {
    const double dk = static_cast<double>(i) - kbar;
    sxy += dk * (window[i] - qbar);
    sxx += dk * dk;
  }
  r.slope = sxx > 0.0 ? sxy / sxx : 0.0;

  const double scale = std::max(ex_mean, 1e-12);
  const std::size_t parts = 4;
  const std::size_t len = window.size() / parts;
  double lo = kInf, hi = -kInf;
  for (std::size_t p = 0; p < parts; ++p) {
    const auto sub = window.subspan(p * len, len);
    const double mean = std::accumulate(sub.begin(), sub.end(), 0.0) / static_cast<double>(len);
    lo = std::min(lo, mean);
    hi = std::max(hi, mean);
  }
  const bool plateau = hi - lo <= 0.5 * qbar + ex_mean;

  if (r.slope > kUnstableSlope * scale)
    r.verdict = Verdict::Unstable;
  else if (r.slope < kStableSlope * scale && plateau)
    r.verdict = Verdict::Stable;
  else
    r.verdict = Verdict::Inconclusive;
  return r;
}

PolicySpec prepare_policy(const ScenarioConfig& cfg) {
  PolicySpec policy = cfg.policy;
  if (policy.kind == PolicyKind::MdpTable && !policy.table) {
    const MdpModel model = build_model(*cfg.mdp, cfg.arrival, cfg.harvest, cfg.rf);
    AverageCostResult solved = average_cost_solve(model, AverageCostMethod::PolicyIteration);
    if (solved.status != SolveStatus::Ok)
      throw std::runtime_error("MDP_OPTIMAL: average-cost solve did not succeed");
    policy.table = std::make_shared<const PolicyTable>(std::move(solved.table));
  }
  return policy;
}

ReplicationMetrics simulate_replication(const ScenarioConfig& cfg, const PolicySpec& policy,
                                        int replication, std::vector<double>* trace,
                                        const SlotObserver& observer) {
  SampleStream xs(cfg.arrival, cfg.seed, substream(replication, kArrival));
  SampleStream ys(cfg.harvest, cfg.seed, substream(replication, kHarvest));
  std::optional<SampleStream> zs, hs;
  if (cfg.sensing) zs.emplace(*cfg.sensing, cfg.seed, substream(replication, kSensing));
  if (cfg.fading) hs.emplace(DistributionSpec{*cfg.fading}, cfg.seed, substream(replication, kFading));

  const FadingSummary fs = summarize(cfg.fading);
  DecisionContext ctx;
  ctx.ey = cfg.ey_mean();
  ctx.h0 = water_level(cfg, policy);
  ctx.h_max = fs.h_max;
  ctx.p_h_max = fs.p_h_max;
  ctx.rf = cfg.rf;
  const Buffers buffers = cfg.buffers();

  NodeState state;
  double y_prev = 0.0;
  double q_sum = 0.0, waste_sum = 0.0, arrived = 0.0, dropped = 0.0;
  std::int64_t outages = 0;
  if (trace) trace->reserve(trace->size() + static_cast<std::size_t>(cfg.horizon));

  for (std::int64_t k = 0; k < cfg.horizon; ++k) {
    SlotRecord rec;
    rec.before = state;
    rec.h = hs ? hs->sample() : 1.0;
    ctx.q = state.q;
    ctx.e = state.e;
    ctx.h = rec.h;
    ctx.y_prev = y_prev;
    rec.T = decide(policy, ctx);
    rec.waste = wasted_energy(policy, ctx, rec.T);
    rec.x = xs.sample();
    rec.y = ys.sample();
    if (zs) {
      // Sensing draws on what is left after this slot's transmission.
      rec.z = zs->sample();
      if (rec.z > state.e - rec.T) {
        rec.outage = true;
        rec.x = 0.0;
        rec.z = 0.0;
      }
    }
    rec.result = step(state, rec.T, rec.x, rec.y, rec.h, cfg.rf, buffers, rec.z);
    if (trace) trace->push_back(state.q);
    if (k >= cfg.warmup) {
      q_sum += state.q;
      waste_sum += rec.waste;
      arrived += rec.x;
      dropped += rec.result.dropped_bits;
      outages += rec.outage ? 1 : 0;
    }
    if (observer) observer(rec);
    y_prev = rec.y;
    state = rec.result.next;
  }

  const double slots = static_cast<double>(cfg.horizon - cfg.warmup);
  ReplicationMetrics m;
  m.mean_queue = q_sum / slots;
  m.mean_waste = waste_sum / slots;
  m.drop_fraction = arrived > 0.0 ? dropped / arrived : 0.0;
  m.sensing_outage_fraction = static_cast<double>(outages) / slots;
  if (trace) {
    const auto st = classify_stability(*trace, cfg.ex_mean());
    m.slope = st.slope;
    m.verdict = m.drop_fraction > kDropUnstable ? Verdict::Unstable : st.verdict;
  }
  return m;
}

MetricsReport run(const ScenarioConfig& cfg, int jobs) {
  cfg.validate();
  const PolicySpec policy = prepare_policy(cfg);
  const int reps = cfg.replications;
  std::vector<ReplicationMetrics> results(static_cast<std::size_t>(reps));
  std::vector<std::vector<double>> traces(static_cast<std::size_t>(reps));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < reps; r = next++) {
      auto& tr = traces[static_cast<std::size_t>(r)];
      results[static_cast<std::size_t>(r)] = simulate_replication(cfg, policy, r, &tr);
    }
  };
  const int threads = std::clamp(jobs, 1, reps);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          worker();
        } catch (...) {
          failures[static_cast<std::size_t>(t)] = std::current_exception();
          next = reps;
        }
      });
    for (auto& th : pool) th.join();
    for (const auto& f : failures)
      if (f) std::rethrow_exception(f);
  }

  MetricsReport rep;
  rep.replications = results;
  rep.mean_queue = mean_of(results, &ReplicationMetrics::mean_queue);
  rep.mean_waste = mean_of(results, &ReplicationMetrics::mean_waste);
  rep.drop_fraction = mean_of(results, &ReplicationMetrics::drop_fraction);
  rep.sensing_outage_fraction = mean_of(results, &ReplicationMetrics::sensing_outage_fraction);
  if (reps >= 2) {
    double ss = 0.0;
    for (const auto& r : results) ss += (r.mean_queue - rep.mean_queue) * (r.mean_queue - rep.mean_queue);
    rep.ci_half_width = 1.96 * std::sqrt(ss / (reps - 1)) / std::sqrt(static_cast<double>(reps));
  }

  // Verdict from the replication-averaged trace.
  std::vector<double> avg(static_cast<std::size_t>(cfg.horizon), 0.0);
  for (const auto& tr : traces)
    for (std::size_t k = 0; k < avg.size(); ++k) avg[k] += tr[k];
  for (double& v : avg) v /= reps;
  traces.clear();
  const auto st = classify_stability(avg, cfg.ex_mean());
  rep.slope = st.slope;
  rep.verdict = rep.drop_fraction > kDropUnstable ? Verdict::Unstable : st.verdict;
  return rep;
}

HittingTimeReport hitting_time_stats(const ScenarioConfig& cfg, double tol) {
  cfg.validate();
  if (!std::isfinite(cfg.energy_cap))
    throw ConfigError("hitting-time needs a finite energy_cap");
  const PolicySpec policy = prepare_policy(cfg);
  const double cap = cfg.energy_cap;
  std::vector<double> taus;

  for (int r = 0; r < cfg.replications; ++r) {
    SampleStream xs(cfg.arrival, cfg.seed, substream(r, kArrival));
    SampleStream ys(cfg.harvest, cfg.seed, substream(r, kHarvest));
    std::optional<SampleStream> hs;
    if (cfg.fading) hs.emplace(DistributionSpec{*cfg.fading}, cfg.seed, substream(r, kFading));
    const FadingSummary fs = summarize(cfg.fading);
    DecisionContext ctx;
    ctx.ey = cfg.ey_mean();
    ctx.h0 = water_level(cfg, policy);
    ctx.h_max = fs.h_max;
    ctx.p_h_max = fs.p_h_max;
    ctx.rf = cfg.rf;
    const Buffers buffers = cfg.buffers();

    NodeState state{0.0, cap, 0};
    double y_prev = 0.0;
    std::int64_t last = 0;
    for (std::int64_t k = 1; k <= cfg.horizon; ++k) {
      ctx.q = state.q;
      ctx.e = state.e;
      ctx.h = hs ? hs->sample() : 1.0;
      ctx.y_prev = y_prev;
      const double T = decide(policy, ctx);
      const double x = xs.sample();
      const double y = ys.sample();
      state = step(state, T, x, y, ctx.h, cfg.rf, buffers).next;
      y_prev = y;
      if (state.q <= tol && state.e >= cap - tol) {
        taus.push_back(static_cast<double>(k - last));
        last = k;
      }
    }
  }

  HittingTimeReport rep;
  rep.returns = taus.size();
  rep.inconclusive = taus.size() < kMinReturns;
  if (taus.empty()) return rep;
  const double n = static_cast<double>(taus.size());
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
  for (double t : taus) {
    s1 += t;
    s2 += t * t;
    s3 += t * t * t;
    s4 += t * t * t * t;
  }
  rep.mean_tau = s1 / n;
  rep.mean_tau2 = s2 / n;
  if (taus.size() >= 2) {
    rep.se_mean_tau = std::sqrt(std::max(0.0, s2 / n - rep.mean_tau * rep.mean_tau) / (n - 1));
    rep.se_mean_tau2 =
        std::sqrt(std::max(0.0, s4 / n - rep.mean_tau2 * rep.mean_tau2) / (n - 1));
  }
  (void)s3;
  return rep;
}

}  // namespace ehnode
