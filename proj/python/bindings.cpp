#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ehnode/analysis.hpp"
#include "ehnode/cli.hpp"
#include "ehnode/config.hpp"
#include "ehnode/errors.hpp"
#include "ehnode/mdp.hpp"

namespace py = pybind11;
using namespace ehnode;

namespace {

py::dict metrics_dict(const MetricsReport& r) {
  py::dict d;
  d["mean_queue"] = r.mean_queue;
  d["ci_half_width"] = r.ci_half_width;
  d["slope"] = r.slope;
  d["verdict"] = std::string(verdict_name(r.verdict));
  d["mean_waste"] = r.mean_waste;
  d["drop_fraction"] = r.drop_fraction;
  d["sensing_outage_fraction"] = r.sensing_outage_fraction;
  py::list reps;
  for (const auto& m : r.replications) reps.append(m.mean_queue);
  d["replication_means"] = reps;
  return d;
}

ScenarioConfig scenario_for(const ExperimentConfig& cfg, const std::optional<std::string>& policy,
                            std::optional<double> ex) {
  ScenarioConfig c = ex ? at_load(cfg.base, *ex) : cfg.base;
  if (policy) {
    const PolicyKind k = policy_kind_from_name(*policy);
    auto it = std::find_if(cfg.policies.begin(), cfg.policies.end(),
                           [k](const PolicySpec& p) { return p.kind == k; });
    c.policy = it != cfg.policies.end() ? *it : PolicySpec::make(k);
  }
  return c;
}

py::array_t<double> as_grid(const std::vector<double>& v, int n_q, int n_e) {
  py::array_t<double> a({n_q, n_e});
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::dict table_dict(const PolicyTable& t) {
  py::dict d;
  std::vector<double> action(t.action.begin(), t.action.end());
  d["action"] = as_grid(action, t.n_q, t.n_e);
  d["value"] = as_grid(t.value, t.n_q, t.n_e);
  d["alpha"] = t.alpha;
  d["gain"] = t.gain;
  d["iterations"] = t.iterations;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Energy-harvesting node simulator and MDP solver";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<RateFunction>(m, "RateFunction")
      .def_static("linear", &RateFunction::linear, py::arg("gamma"))
      .def_static("log_e", &RateFunction::log_e, py::arg("beta") = 1.0)
      .def_static("log2", &RateFunction::log2, py::arg("beta") = 1.0)
      .def_static("half_log", &RateFunction::half_log, py::arg("beta") = 1.0)
      .def("__call__", [](const RateFunction& rf, double x) { return g_eval(rf, x); })
      .def("inverse", [](const RateFunction& rf, double r) { return g_inverse(rf, r); })
      .def_property_readonly("name", &RateFunction::name)
      .def("__repr__", [](const RateFunction& rf) { return "RateFunction(" + rf.name() + ")"; });

  m.def("preset_names", &preset_names);
  m.def("preset_json", [](const std::string& name) { return to_json(preset(name)); },
        py::arg("name"), "Resolved preset as a JSON string.");

  m.def(
      "thresholds",
      [](const std::string& config_json) {
        py::dict d;
        for (const auto& [k, v] : threshold_fields(thresholds(parse_config(config_json).base)))
          d[py::str(k)] = v;
        return d;
      },
      py::arg("config_json"));

  m.def(
      "simulate",
      [](const std::string& config_json, std::optional<std::string> policy,
         std::optional<double> ex, int jobs) {
        const ScenarioConfig c = scenario_for(parse_config(config_json), policy, ex);
        MetricsReport r;
        {
          py::gil_scoped_release release;
          r = run(c, jobs);
        }
        return metrics_dict(r);
      },
      py::arg("config_json"), py::arg("policy") = py::none(), py::arg("ex") = py::none(),
      py::arg("jobs") = 1);

  m.def(
      "sweep_csv",
      [](const std::string& config_json, int jobs) {
        const ExperimentConfig cfg = parse_config(config_json);
        if (cfg.sweep.empty()) throw ConfigError("config has no sweep grid");
        std::ostringstream os;
        {
          py::gil_scoped_release release;
          write_sweep_csv(os, sweep(cfg.base, cfg.policies, cfg.sweep, jobs));
        }
        return os.str();
      },
      py::arg("config_json"), py::arg("jobs") = 1);

  m.def(
      "solve_mdp",
      [](const std::string& config_json, std::optional<double> alpha) {
        const ExperimentConfig cfg = parse_config(config_json);
        if (!cfg.base.mdp) throw ConfigError("config has no 'mdp' grid");
        const MdpModel model =
            build_model(*cfg.base.mdp, cfg.base.arrival, cfg.base.harvest, cfg.base.rf);
        if (alpha) return table_dict(value_iterate(model, *alpha));
        const AverageCostResult r = average_cost_solve(model, AverageCostMethod::PolicyIteration);
        if (r.status != SolveStatus::Ok) throw std::runtime_error("average-cost solve failed");
        return table_dict(r.table);
      },
      py::arg("config_json"), py::arg("alpha") = py::none(),
      "Average-cost table when alpha is None, else the discounted one.");

  m.def(
      "waterfill_level",
      [](std::vector<double> values, std::vector<double> probs, double budget) {
        return waterfill_level(DiscretePmf{std::move(values), std::move(probs)}, budget);
      },
      py::arg("values"), py::arg("probs"), py::arg("budget"));

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = dispatch(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a command line; returns (exit_code, stdout, stderr).");
}
