#include "ehnode/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "ehnode/errors.hpp"

namespace ehnode {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

ThresholdReport thresholds(const ScenarioConfig& cfg) {
  const RateFunction& rf = cfg.rf;
  const double ey = cfg.ey_mean();
  ThresholdReport r;
  r.g_of_EY = rf(ey);
  r.E_g_of_Y = expected_g(cfg.harvest, rf);
  if (!cfg.fading) {
    r.E_g_of_hY = r.E_g_of_Y;
    r.E_g_of_hEY = r.g_of_EY;
    r.fading_TO_linear_boundary = r.g_of_EY;
    r.wf_boundary = r.g_of_EY;
    return r;
  }
  const DiscretePmf& h = *cfg.fading;
  r.E_g_of_hY = expected_g(cfg.harvest, rf, h);
  double h_bar = -1.0, p_bar = 0.0;
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    r.E_g_of_hEY += h.probs[i] * rf(h.values[i] * ey);
    if (h.probs[i] > 0.0 && h.values[i] > h_bar) {
      h_bar = h.values[i];
      p_bar = h.probs[i];
    }
  }
  // All energy concentrated on the best state.
  r.fading_TO_linear_boundary = p_bar * rf(h_bar * ey / p_bar);

  const double scale = rf.snr_scale();
  DiscretePmf scaled = h;
  for (double& v : scaled.values) v *= scale;
  const double eps = cfg.policy.resolved_epsilon(ey);
  r.h0 = waterfill_level(scaled, ey - eps);
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    const double gain = scaled.values[i];
    if (gain <= 0.0) continue;
    const double t = std::max(0.0, 1.0 / r.h0 - 1.0 / gain);
    r.wf_boundary += h.probs[i] * rf(h.values[i] * t);
  }
  return r;
}

std::vector<std::pair<std::string, double>> threshold_fields(const ThresholdReport& r) {
  return {{"g_of_EY", r.g_of_EY},
          {"E_g_of_Y", r.E_g_of_Y},
          {"E_g_of_hY", r.E_g_of_hY},
          {"E_g_of_hEY", r.E_g_of_hEY},
          {"fading_TO_linear_boundary", r.fading_TO_linear_boundary},
          {"wf_boundary", r.wf_boundary},
          {"h0", r.h0}};
}

ScenarioConfig at_load(const ScenarioConfig& base, double ex) {
  ScenarioConfig cfg = base;
  cfg.arrival = base.arrival.with_mean(ex);
  return cfg;
}

SweepResult sweep(const ScenarioConfig& base, const std::vector<PolicySpec>& policies,
                  const std::vector<double>& ex_grid, int jobs) {
  for (std::size_t i = 1; i < ex_grid.size(); ++i)
    if (!(ex_grid[i] > ex_grid[i - 1]))
      throw ConfigError("sweep grid must be strictly increasing");

  SweepResult result;
  result.base = base;
  for (const auto& p : policies)
    for (double ex : ex_grid) result.cells.push_back({std::string(p.name()), ex, {}, {}});

  const std::size_t n = result.cells.size();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      SweepCell& cell = result.cells[i];
      try {
        ScenarioConfig cfg = at_load(base, cell.ex_mean);
        cfg.policy = policies[i / ex_grid.size()];
        cell.report = run(cfg, 1);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const int threads = std::clamp<int>(jobs, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return result;
}

namespace {

// Fitted families (truncated Poisson) reproduce a requested mean only to
// ~1e-10, so load columns are printed on a 1e-9 grid.
double nominal(double v) { return std::abs(v) < 1e6 ? std::round(v * 1e9) / 1e9 : v; }

constexpr const char* kHeader =
    "scenario_id,figure_tag,policy,rate_function,ex_mean,ey_mean,replication,mean_queue,"
    "ci_half_width,slope,verdict,mean_waste,drop_fraction,sensing_outage_fraction,seed\n";

void write_rows(std::ostream& out, const ScenarioConfig& cfg, std::string_view policy, double ex,
                const MetricsReport* rep) {
  const std::string prefix = cfg.scenario_id + "," + cfg.figure_tag + "," + std::string(policy) +
                             "," + cfg.rf.name() + "," + format_double(nominal(ex)) + "," +
                             format_double(nominal(cfg.ey_mean())) + ",";
  const std::string seed = std::to_string(cfg.seed);
  if (!rep) {
    out << prefix << "agg,,,,ERROR,,,," << seed << '\n';
    return;
  }
  for (std::size_t r = 0; r < rep->replications.size(); ++r) {
    const auto& m = rep->replications[r];
    out << prefix << r << ',' << format_double(m.mean_queue) << ",0," << format_double(m.slope)
        << ',' << verdict_name(m.verdict) << ',' << format_double(m.mean_waste) << ','
        << format_double(m.drop_fraction) << ',' << format_double(m.sensing_outage_fraction)
        << ',' << seed << '\n';
  }
  out << prefix << "agg," << format_double(rep->mean_queue) << ','
      << format_double(rep->ci_half_width) << ',' << format_double(rep->slope) << ','
      << verdict_name(rep->verdict) << ',' << format_double(rep->mean_waste) << ','
      << format_double(rep->drop_fraction) << ',' << format_double(rep->sensing_outage_fraction)
      << ',' << seed << '\n';
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << kHeader;
  for (const auto& cell : result.cells) {
    const MetricsReport* rep = cell.report ? &*cell.report : nullptr;
    write_rows(out, result.base, cell.policy, cell.ex_mean, rep);
  }
}

void write_metrics_csv(std::ostream& out, const ScenarioConfig& cfg, const MetricsReport& report) {
  out << kHeader;
  write_rows(out, cfg, cfg.policy.name(), cfg.ex_mean(), &report);
}

std::vector<SensingPoint> sensing_sweep(const ScenarioConfig& base, const std::vector<double>& cs,
                                        int jobs) {
  if (!base.sensing) throw ConfigError("sensing sweep needs a sensing distribution");
  std::vector<SensingPoint> out(cs.size());
  const double ez = dist_mean(*base.sensing);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cs.size(); i = next++) {
      ScenarioConfig cfg = base;
      cfg.policy = PolicySpec::make(PolicyKind::ConstantPower);
      cfg.policy.c_power = cs[i];
      out[i].c = cs[i];
      out[i].budget_margin = cfg.ey_mean() - cs[i] - ez;
      out[i].report = run(cfg, 1);
    }
  };
  const int threads = std::clamp<int>(jobs, 1, static_cast<int>(std::max<std::size_t>(cs.size(), 1)));
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
          next = cs.size();
        }
      });
    for (auto& th : pool) th.join();
    for (const auto& f : failures)
      if (f) std::rethrow_exception(f);
  }
  return out;
}

}  // namespace ehnode
