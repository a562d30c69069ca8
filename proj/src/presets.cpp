// Built-in scenarios. Every constant a figure leaves open (epsilon, c,
// horizon, replications, load grid, MDP grid) is pinned here.

#include <cmath>
#include <functional>
#include <map>

#include "ehnode/config.hpp"
#include "ehnode/errors.hpp"

namespace ehnode {

namespace {

const DiscretePmf kFadingPmf{{0.1, 0.5, 1.0, 2.2}, {0.1, 0.3, 0.4, 0.2}};

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> out;
  for (int i = 0; lo + i * step <= hi + 1e-9; ++i)
    out.push_back(std::round((lo + i * step) * 1e9) / 1e9);
  return out;
}

std::vector<PolicySpec> policies(std::initializer_list<PolicyKind> kinds) {
  std::vector<PolicySpec> out;
  for (auto k : kinds) out.push_back(PolicySpec::make(k));
  return out;
}

ExperimentConfig scenario(std::string id, DistributionSpec arrival, DistributionSpec harvest,
                          RateFunction rf, std::vector<PolicySpec> pols, std::vector<double> loads) {
  ExperimentConfig cfg;
  cfg.base.scenario_id = id;
  cfg.base.figure_tag = std::move(id);
  cfg.base.arrival = std::move(arrival);
  cfg.base.harvest = std::move(harvest);
  cfg.base.rf = rf;
  cfg.base.horizon = 200'000;
  cfg.base.warmup = 20'000;
  cfg.base.replications = 10;
  cfg.base.seed = 1;
  cfg.policies = std::move(pols);
  cfg.base.policy = cfg.policies.front();
  cfg.sweep = std::move(loads);
  return cfg;
}

ExperimentConfig fig2() {
  auto cfg = scenario("fig2", truncated_poisson_with_mean(0.5, 5), truncated_poisson_with_mean(1.0, 5),
                      RateFunction::log2(1.0),
                      policies({PolicyKind::MdpTable, PolicyKind::TO, PolicyKind::Greedy}),
                      {0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95});
  cfg.base.energy_cap = 50;
  cfg.base.data_cap = 50;
  cfg.base.queue_quantum = 1;
  cfg.base.mdp = MdpGrid{51, 51, 1.0, 1.0, 0.0};
  return cfg;
}

ExperimentConfig fig3() {
  return scenario("fig3", DistributionSpec{Exponential{5.0}}, DistributionSpec{Exponential{1.0}},
                  RateFunction::linear(10.0),
                  policies({PolicyKind::Unbuffered, PolicyKind::TO, PolicyKind::Greedy,
                            PolicyKind::MTO}),
                  grid(1.0, 9.0, 1.0));
}

ExperimentConfig fig4() {
  return scenario("fig4", DistributionSpec{Uniform{0.0, 10.0}}, DistributionSpec{Uniform{0.0, 2.0}},
                  RateFunction::linear(10.0),
                  policies({PolicyKind::Unbuffered, PolicyKind::TO, PolicyKind::Greedy,
                            PolicyKind::MTO}),
                  grid(1.0, 9.0, 1.0));
}

ExperimentConfig unfaded_log(std::string id, DistributionSpec x, DistributionSpec y) {
  return scenario(std::move(id), std::move(x), std::move(y), RateFunction::log_e(1.0),
                  policies({PolicyKind::Unbuffered, PolicyKind::TO, PolicyKind::Greedy,
                            PolicyKind::MTO}),
                  grid(0.2, 2.6, 0.2));
}

ExperimentConfig faded(std::string id, DistributionSpec x, DistributionSpec y, RateFunction rf,
                       std::vector<PolicySpec> pols, std::vector<double> loads) {
  auto cfg = scenario(std::move(id), std::move(x), std::move(y), rf, std::move(pols),
                      std::move(loads));
  cfg.base.fading = kFadingPmf;
  return cfg;
}

const std::vector<PolicyKind> kLinearFaded{PolicyKind::Unbuffered, PolicyKind::Greedy,
                                           PolicyKind::UnfadedTO, PolicyKind::FadingTOLinear};
const std::vector<PolicyKind> kLogFaded{PolicyKind::Unbuffered, PolicyKind::Greedy,
                                        PolicyKind::TO,         PolicyKind::MTO,
                                        PolicyKind::WF,         PolicyKind::MWF};

std::vector<PolicySpec> from(const std::vector<PolicyKind>& kinds) {
  std::vector<PolicySpec> out;
  for (auto k : kinds) out.push_back(PolicySpec::make(k));
  return out;
}

ExperimentConfig linear_small() {
  auto cfg = scenario("linear-small", DistributionSpec{DiscretePmf{{0, 10, 20}, {0.5, 0.3, 0.2}}},
                      DistributionSpec{DiscretePmf{{0, 1, 2}, {0.4, 0.3, 0.3}}},
                      RateFunction::linear(10.0),
                      policies({PolicyKind::Greedy, PolicyKind::MdpTable}), {});
  cfg.base.figure_tag = "";
  cfg.base.energy_cap = 20;
  cfg.base.data_cap = 200;
  cfg.base.queue_quantum = 10;
  cfg.base.mdp = MdpGrid{21, 21, 10.0, 1.0, 1000.0};
  return cfg;
}

ExperimentConfig sensing() {
  auto cfg = scenario("sensing", DistributionSpec{Erlang{5, 0.3}}, DistributionSpec{Erlang{5, 1.0}},
                      RateFunction::log_e(1.0), policies({PolicyKind::ConstantPower}),
                      {0.1, 0.2, 0.3});
  cfg.base.figure_tag = "";
  cfg.base.sensing = DistributionSpec{Deterministic{0.3}};
  cfg.policies.front().c_power = 0.5;
  cfg.base.policy = cfg.policies.front();
  return cfg;
}

const std::map<std::string, std::function<ExperimentConfig()>, std::less<>>& registry() {
  static const std::map<std::string, std::function<ExperimentConfig()>, std::less<>> r{
      {"fig2", fig2},
      {"fig3", fig3},
      {"fig4", fig4},
      {"fig5",
       [] {
         return unfaded_log("fig5", DistributionSpec{Exponential{1.0}},
                            DistributionSpec{Exponential{10.0}});
       }},
      {"fig6",
       [] {
         return unfaded_log("fig6", DistributionSpec{Erlang{5, 1.0}},
                            DistributionSpec{Erlang{5, 10.0}});
       }},
      {"fig7",
       [] {
         return faded("fig7", DistributionSpec{Erlang{5, 5.0}}, DistributionSpec{Erlang{5, 1.0}},
                      RateFunction::linear(10.0), from(kLinearFaded), grid(2.0, 24.0, 2.0));
       }},
      {"fig8",
       [] {
         return faded("fig8", staggered_hyperexponential(5.0), staggered_hyperexponential(1.0),
                      RateFunction::linear(10.0), from(kLinearFaded), grid(2.0, 24.0, 2.0));
       }},
      {"fig9",
       [] {
         return faded("fig9", DistributionSpec{Erlang{5, 0.3}}, DistributionSpec{Erlang{5, 1.0}},
                      RateFunction::log_e(1.0), from(kLogFaded), grid(0.05, 0.75, 0.05));
       }},
      {"fig10",
       [] {
         return faded("fig10", staggered_hyperexponential(0.3), staggered_hyperexponential(1.0),
                      RateFunction::log_e(1.0), from(kLogFaded), grid(0.05, 0.75, 0.05));
       }},
      {"linear-small", linear_small},
      {"sensing", sensing},
  };
  return r;
}

}  // namespace

ExperimentConfig preset(std::string_view name) {
  const auto& r = registry();
  auto it = r.find(name);
  if (it == r.end()) throw ConfigError("unknown preset '" + std::string(name) + "'");
  return it->second();
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : registry()) out.push_back(k);
  return out;
}

}  // namespace ehnode
