#include "ehnode/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ehnode/analysis.hpp"
#include "ehnode/config.hpp"
#include "ehnode/errors.hpp"
#include "ehnode/mdp.hpp"
#include "json.hpp"

namespace ehnode {

namespace {

using nlohmann::json;

struct Options {
  std::string command;
  std::string config_path;
  std::string preset_name;
  std::string out_path;
  std::string policies;
  std::vector<double> ex;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  double alpha = 0.0;  // mdp-solve: 0 means average cost
};

class ViolationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig load(const Options& o) {
  if (o.config_path.empty() == o.preset_name.empty())
    throw ConfigError("give exactly one of --config or --preset");
  ExperimentConfig cfg = o.config_path.empty() ? preset(o.preset_name)
                                               : parse_config(read_file(o.config_path));
  if (o.seed_given) cfg.base.seed = o.seed;
  if (!o.policies.empty()) {
    cfg.policies.clear();
    std::stringstream ss(o.policies);
    std::string name;
    while (std::getline(ss, name, ',')) {
      try {
        PolicySpec p = PolicySpec::make(policy_kind_from_name(name));
        if (p.kind == PolicyKind::ConstantPower) p.c_power = cfg.base.policy.c_power;
        cfg.policies.push_back(p);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("--policies: ") + e.what());
      }
    }
    if (cfg.policies.empty()) throw ConfigError("--policies is empty");
    cfg.base.policy = cfg.policies.front();
  }
  if (!o.ex.empty()) cfg.sweep = o.ex;
  for (const auto& p : cfg.policies) {
    ScenarioConfig c = cfg.base;
    c.policy = p;
    c.validate();
  }
  cfg.warnings = overload_warnings(cfg);
  return cfg;
}

/// Writes to --out when given, else to the fallback stream.
template <class F>
void emit(const Options& o, std::ostream& fallback, F&& body) {
  if (o.out_path.empty()) {
    body(fallback);
    return;
  }
  std::ofstream file(o.out_path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open output '" + o.out_path + "'");
  body(file);
  if (!file) throw std::runtime_error("write failed for '" + o.out_path + "'");
}

void write_manifest(const Options& o, const ExperimentConfig& cfg, const std::string& started) {
  if (o.out_path.empty()) return;
  json m;
  m["command"] = o.command;
  m["config_path"] = o.config_path;
  m["preset"] = o.preset_name;
  m["output_path"] = o.out_path;
  m["master_seed"] = cfg.base.seed;
  m["jobs"] = o.jobs;
  m["tool_version"] = EHNODE_VERSION;
  m["config"] = json::parse(to_json(cfg));
  m["warnings"] = cfg.warnings;
  m["started_utc"] = started;
  m["finished_utc"] = utc_now();
  std::ofstream f(o.out_path + ".manifest.json");
  f << m.dump(2) << '\n';
}

void kv(std::ostream& os, const std::string& key, double v) {
  os << key << ',' << format_double(v) << '\n';
}

void cmd_simulate(const Options& o, const ExperimentConfig& cfg, std::ostream& out) {
  std::vector<std::pair<ScenarioConfig, MetricsReport>> rows;
  for (const auto& p : cfg.policies) {
    std::vector<ScenarioConfig> scenarios;
    if (o.ex.empty()) scenarios.push_back(cfg.base);
    for (double ex : o.ex) scenarios.push_back(at_load(cfg.base, ex));
    for (auto& c : scenarios) {
      c.policy = p;
      rows.emplace_back(c, run(c, o.jobs));
    }
  }
  emit(o, out, [&](std::ostream& os) {
    bool first = true;
    for (const auto& [c, r] : rows) {
      std::ostringstream block;
      write_metrics_csv(block, c, r);
      std::string text = block.str();
      if (!first) text = text.substr(text.find('\n') + 1);
      os << text;
      first = false;
    }
  });
}

void cmd_sweep(const Options& o, const ExperimentConfig& cfg, std::ostream& out) {
  if (cfg.sweep.empty()) throw ConfigError("sweep needs a load grid (config 'sweep' or --ex)");
  const SweepResult res = sweep(cfg.base, cfg.policies, cfg.sweep, o.jobs);
  emit(o, out, [&](std::ostream& os) { write_sweep_csv(os, res); });
  for (const auto& cell : res.cells)
    if (!cell.error.empty())
      throw std::runtime_error("sweep cell " + cell.policy + " @ " + format_double(cell.ex_mean) +
                               " failed: " + cell.error);
}

void cmd_thresholds(const Options& o, const ExperimentConfig& cfg, std::ostream& out) {
  const ThresholdReport r = thresholds(cfg.base);
  emit(o, out, [&](std::ostream& os) {
    os << "key,value\n";
    for (const auto& [k, v] : threshold_fields(r)) kv(os, k, v);
  });
}

MdpModel model_of(const ExperimentConfig& cfg) {
  if (!cfg.base.mdp) throw ConfigError("scenario has no 'mdp' grid");
  return build_model(*cfg.base.mdp, cfg.base.arrival, cfg.base.harvest, cfg.base.rf);
}

void cmd_mdp_solve(const Options& o, const ExperimentConfig& cfg, std::ostream& out) {
  const MdpModel model = model_of(cfg);
  PolicyTable table;
  if (o.alpha > 0.0) {
    if (!(o.alpha < 1.0)) throw ConfigError("--alpha must lie in (0, 1)");
    table = value_iterate(model, o.alpha);
  } else {
    AverageCostResult r = average_cost_solve(model, AverageCostMethod::PolicyIteration);
    if (r.status == SolveStatus::Multichain)
      throw std::runtime_error("policy evaluation is singular: MULTICHAIN");
    if (r.status != SolveStatus::Ok) throw std::runtime_error("average-cost solve did not converge");
    table = std::move(r.table);
  }
  emit(o, out, [&](std::ostream& os) { write_policy_table_csv(os, table); });
}

void cmd_mdp_check(const Options& o, const ExperimentConfig& cfg, std::ostream& out) {
  const MdpModel model = model_of(cfg);
  std::vector<std::pair<std::string, double>> report;
  bool violated = false;

  const AverageCostResult avg = average_cost_solve(model, AverageCostMethod::PolicyIteration);
  if (avg.status != SolveStatus::Ok) throw std::runtime_error("average-cost solve failed");
  report.emplace_back("gain", avg.gain);
  const bool linear = cfg.base.rf.is_linear();
  if (linear) {
    const auto n = greedy_mismatches(model, avg.table).size();
    report.emplace_back("greedy_mismatches_average", static_cast<double>(n));
    violated |= n > 0;
  }
  for (double alpha : {0.9, 0.99}) {
    const PolicyTable vf = value_iterate(model, alpha);
    const StructureReport s = structure_checks(vf);
    const std::string tag = format_double(alpha);
    report.emplace_back("q_monotonicity_violations_" + tag,
                        static_cast<double>(s.q_violations.size()));
    report.emplace_back("e_monotonicity_violations_" + tag,
                        static_cast<double>(s.e_violations.size()));
    violated |= !s.ok();
    if (linear) {
      const auto n = greedy_mismatches(model, vf).size();
      report.emplace_back("greedy_mismatches_" + tag, static_cast<double>(n));
      violated |= n > 0;
    }
  }
  report.emplace_back("boundary_occupancy", boundary_occupancy(model, avg.table));
  emit(o, out, [&](std::ostream& os) {
    os << "key,value\n";
    for (const auto& [k, v] : report) kv(os, k, v);
  });
  if (violated) throw ViolationError("mdp-check found violations");
}

void cmd_hitting_time(const Options& o, const ExperimentConfig& cfg, std::ostream& out) {
  ScenarioConfig c = cfg.base;
  c.policy = o.policies.empty() ? PolicySpec::make(PolicyKind::TO) : cfg.policies.front();
  const HittingTimeReport r = hitting_time_stats(c);
  emit(o, out, [&](std::ostream& os) {
    os << "key,value\n";
    kv(os, "returns", static_cast<double>(r.returns));
    kv(os, "mean_tau", r.mean_tau);
    kv(os, "se_mean_tau", r.se_mean_tau);
    kv(os, "mean_tau2", r.mean_tau2);
    kv(os, "se_mean_tau2", r.se_mean_tau2);
    os << "inconclusive," << (r.inconclusive ? "true" : "false") << '\n';
  });
}

void error_record(std::ostream& err, const char* kind, int code, const std::string& msg) {
  json rec = {{"error", {{"kind", kind}, {"message", msg}, {"exit_code", code}}}};
  err << rec.dump() << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Energy-harvesting node simulator and MDP toolkit", "ehnode"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EHNODE_VERSION);

  struct Command {
    const char* name;
    const char* help;
    void (*fn)(const Options&, const ExperimentConfig&, std::ostream&);
  };
  const Command commands[] = {
      {"simulate", "Run one scenario per policy and write the metrics CSV", cmd_simulate},
      {"sweep", "Run every (policy, E[X]) cell and write the sweep CSV", cmd_sweep},
      {"thresholds", "Write the stability boundaries as key,value CSV", cmd_thresholds},
      {"mdp-solve", "Solve the quantized MDP and write the policy table CSV", cmd_mdp_solve},
      {"mdp-check", "Greedy-optimality and monotonicity checks (exit 3 on violation)",
       cmd_mdp_check},
      {"hitting-time", "Return-time moments to (0, energy_cap)", cmd_hitting_time},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", o.config_path, "JSON config file");
    sub->add_option("--preset", o.preset_name, "Built-in scenario name");
    sub->add_option("--out", o.out_path, "Output CSV path (stdout if omitted)");
    sub->add_option("--seed", o.seed, "Master seed override")->each([&](const std::string&) {
      o.seed_given = true;
    });
    sub->add_option("--policies", o.policies, "Comma-separated policy names");
    sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--ex", o.ex, "E[X] values (override the config grid)");
    if (std::string_view(c.name) == "mdp-solve")
      sub->add_option("--alpha", o.alpha, "Discount factor; omit for average cost");
    sub->callback([&o, name = c.name] { o.command = name; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << EHNODE_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    error_record(err, "usage", kExitConfig, e.what());
    return kExitConfig;
  }

  try {
    const std::string started = utc_now();
    const ExperimentConfig cfg = load(o);
    for (const auto& w : cfg.warnings) err << "warning: " << w << '\n';
    for (const auto& c : commands)
      if (o.command == c.name) {
        std::exception_ptr pending;
        try {
          c.fn(o, cfg, out);
        } catch (const ViolationError&) {
          pending = std::current_exception();
        }
        write_manifest(o, cfg, started);
        if (pending) std::rethrow_exception(pending);
      }
  } catch (const ConfigError& e) {
    error_record(err, "config", kExitConfig, e.what());
    return kExitConfig;
  } catch (const ViolationError& e) {
    error_record(err, "violation", kExitViolation, e.what());
    return kExitViolation;
  } catch (const std::exception& e) {
    error_record(err, "runtime", kExitRuntime, e.what());
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace ehnode
