#include "ehnode/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "ehnode/analysis.hpp"
#include "ehnode/errors.hpp"
#include "json.hpp"

namespace ehnode {

namespace {

using nlohmann::json;

int line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

/// Best-effort line of a key path: each component is searched for as a
/// quoted key after the position of its parent.
int line_of_path(std::string_view text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  bool found = false;
  for (const auto& part : path) {
    if (!part.empty() && std::isdigit(static_cast<unsigned char>(part[0]))) continue;
    const std::string needle = "\"" + part + "\"";
    std::size_t at = text.find(needle, pos);
    while (at != std::string_view::npos) {
      std::size_t after = at + needle.size();
      while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
      if (after < text.size() && text[after] == ':') break;
      at = text.find(needle, at + 1);
    }
    if (at == std::string_view::npos) return 0;
    pos = at;
    found = true;
  }
  return found ? line_of_offset(text, pos) : 0;
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& what) const {
    std::string p;
    for (const auto& c : path) p += "/" + c;
    if (p.empty()) p = "/";
    std::string msg = "config " + p;
    if (int line = line_of_path(text_, path); line > 0) msg += " (line " + std::to_string(line) + ")";
    throw ConfigError(msg + ": " + what);
  }

  void allow(const json& obj, const std::vector<std::string>& path,
             std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      (void)v;
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
        auto p = path;
        p.push_back(k);
        fail(p, "unknown key");
      }
    }
  }

  double number(const json& v, const std::vector<std::string>& path) const {
    if (v.is_number()) return v.get<double>();
    if (v.is_string() && (v == "inf" || v == "infinity")) return kInf;
    if (v.is_null()) return kInf;
    fail(path, "expected a number");
  }

  std::int64_t integer(const json& v, const std::vector<std::string>& path) const {
    if (v.is_number_integer() || v.is_number_unsigned()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    fail(path, "expected an integer");
  }

  std::vector<double> numbers(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto p = path;
      p.push_back(std::to_string(i));
      out.push_back(number(v[i], p));
    }
    return out;
  }

  std::string string(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  template <class F>
  auto guarded(const std::vector<std::string>& path, F&& f) const {
    try {
      return f();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(path, e.what());
    }
  }

 private:
  std::string_view text_;
};

std::vector<std::string> sub(std::vector<std::string> path, const std::string& key) {
  path.push_back(key);
  return path;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

DistributionSpec parse_distribution(const Reader& rd, const json& v,
                                    const std::vector<std::string>& path) {
  if (!v.is_object()) rd.fail(path, "expected a distribution object");
  if (!v.contains("family")) rd.fail(path, "missing 'family'");
  const std::string family = lower(rd.string(v["family"], sub(path, "family")));
  auto need = [&](const char* key) -> const json& {
    if (!v.contains(key)) rd.fail(path, std::string("missing '") + key + "'");
    return v[key];
  };
  auto num = [&](const char* key) { return rd.number(need(key), sub(path, key)); };
  auto nums = [&](const char* key) { return rd.numbers(need(key), sub(path, key)); };

  return rd.guarded(path, [&]() -> DistributionSpec {
    if (family == "exponential") {
      rd.allow(v, path, {"family", "mean"});
      return DistributionSpec{Exponential{num("mean")}};
    }
    if (family == "uniform") {
      rd.allow(v, path, {"family", "lo", "hi"});
      return DistributionSpec{Uniform{num("lo"), num("hi")}};
    }
    if (family == "erlang") {
      rd.allow(v, path, {"family", "stages", "mean"});
      return DistributionSpec{Erlang{static_cast<int>(rd.integer(need("stages"), sub(path, "stages"))),
                                      num("mean")}};
    }
    if (family == "hyperexponential") {
      rd.allow(v, path, {"family", "means", "probs"});
      return DistributionSpec{HyperExponential{nums("means"), nums("probs")}};
    }
    if (family == "staggered_hyperexponential") {
      rd.allow(v, path, {"family", "mean"});
      return staggered_hyperexponential(num("mean"));
    }
    if (family == "truncated_poisson") {
      rd.allow(v, path, {"family", "lambda", "mean", "cutoff"});
      const int cutoff = static_cast<int>(rd.integer(need("cutoff"), sub(path, "cutoff")));
      if (v.contains("lambda") == v.contains("mean"))
        rd.fail(path, "give exactly one of 'lambda' or 'mean'");
      if (v.contains("mean")) return truncated_poisson_with_mean(num("mean"), cutoff);
      return DistributionSpec{TruncatedPoisson{num("lambda"), cutoff}};
    }
    if (family == "discrete") {
      rd.allow(v, path, {"family", "values", "probs"});
      return DistributionSpec{DiscretePmf{nums("values"), nums("probs")}};
    }
    if (family == "deterministic") {
      rd.allow(v, path, {"family", "value"});
      return DistributionSpec{Deterministic{num("value")}};
    }
    rd.fail(sub(path, "family"), "unknown family '" + family + "'");
  });
}

RateFunction parse_rate(const Reader& rd, const json& v, const std::vector<std::string>& path) {
  if (!v.is_object()) rd.fail(path, "expected a rate_function object");
  rd.allow(v, path, {"family", "coeff"});
  if (!v.contains("family")) rd.fail(path, "missing 'family'");
  const std::string family = lower(rd.string(v["family"], sub(path, "family")));
  const double coeff = v.contains("coeff") ? rd.number(v["coeff"], sub(path, "coeff")) : 1.0;
  return rd.guarded(path, [&]() -> RateFunction {
    if (family == "linear") return RateFunction::linear(coeff);
    if (family == "loge" || family == "log") return RateFunction::log_e(coeff);
    if (family == "log2") return RateFunction::log2(coeff);
    if (family == "halflog" || family == "shannon_half_log") return RateFunction::half_log(coeff);
    rd.fail(sub(path, "family"), "unknown rate family '" + family + "'");
  });
}

PolicySpec parse_policy(const Reader& rd, const json& v, const std::vector<std::string>& path) {
  auto kind_of = [&](const json& name, const std::vector<std::string>& p) {
    const std::string n = rd.string(name, p);
    return rd.guarded(p, [&] { return policy_kind_from_name(n); });
  };
  if (v.is_string()) return PolicySpec::make(kind_of(v, path));
  if (!v.is_object()) rd.fail(path, "expected a policy name or object");
  rd.allow(v, path, {"name", "epsilon", "c", "outer", "inner", "c_power"});
  if (!v.contains("name")) rd.fail(path, "missing 'name'");
  PolicySpec p = PolicySpec::make(kind_of(v["name"], sub(path, "name")));
  if (v.contains("epsilon")) p.epsilon = rd.number(v["epsilon"], sub(path, "epsilon"));
  if (v.contains("c")) p.c = rd.number(v["c"], sub(path, "c"));
  if (v.contains("outer")) p.outer = rd.number(v["outer"], sub(path, "outer"));
  if (v.contains("inner")) p.inner = rd.number(v["inner"], sub(path, "inner"));
  if (v.contains("c_power")) p.c_power = rd.number(v["c_power"], sub(path, "c_power"));
  if (p.kind != PolicyKind::MdpTable) rd.guarded(path, [&] { p.validate(); return 0; });
  return p;
}

MdpGrid parse_mdp(const Reader& rd, const json& v, const std::vector<std::string>& path) {
  rd.allow(v, path, {"n_q", "n_e", "q_step", "e_step", "overflow_penalty"});
  MdpGrid g;
  if (v.contains("n_q")) g.n_q = static_cast<int>(rd.integer(v["n_q"], sub(path, "n_q")));
  if (v.contains("n_e")) g.n_e = static_cast<int>(rd.integer(v["n_e"], sub(path, "n_e")));
  if (v.contains("q_step")) g.q_step = rd.number(v["q_step"], sub(path, "q_step"));
  if (v.contains("e_step")) g.e_step = rd.number(v["e_step"], sub(path, "e_step"));
  if (v.contains("overflow_penalty"))
    g.overflow_penalty = rd.number(v["overflow_penalty"], sub(path, "overflow_penalty"));
  if (g.n_q < 1 || g.n_e < 1 || !(g.q_step > 0) || !(g.e_step > 0) || !(g.overflow_penalty >= 0))
    rd.fail(path, "grid sizes and steps must be positive");
  return g;
}

DiscretePmf parse_fading(const Reader& rd, const json& v, const std::vector<std::string>& path) {
  rd.allow(v, path, {"values", "probs"});
  if (!v.contains("values") || !v.contains("probs")) rd.fail(path, "needs 'values' and 'probs'");
  DiscretePmf pmf{rd.numbers(v["values"], sub(path, "values")),
                  rd.numbers(v["probs"], sub(path, "probs"))};
  rd.guarded(path, [&] { return DistributionSpec{pmf}; });
  return pmf;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error (line " +
                      std::to_string(line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0)) +
                      "): " + e.what());
  }
  Reader rd(text);
  const std::vector<std::string> root;
  rd.allow(doc, root,
           {"version", "preset", "scenario_id", "figure_tag", "arrival", "harvest", "sensing",
            "fading", "rate_function", "policy", "policies", "energy_cap", "data_cap",
            "queue_quantum", "horizon", "warmup", "replications", "seed", "sweep", "mdp"});
  if (doc.contains("version")) {
    if (rd.integer(doc["version"], {"version"}) != kConfigVersion)
      rd.fail({"version"}, "unsupported version (expected " + std::to_string(kConfigVersion) + ")");
  }

  ExperimentConfig out;
  if (doc.contains("preset")) {
    const std::string name = rd.string(doc["preset"], {"preset"});
    out = rd.guarded({"preset"}, [&] { return preset(name); });
  } else {
    out.policies = {out.base.policy};
  }
  ScenarioConfig& c = out.base;

  if (doc.contains("scenario_id")) c.scenario_id = rd.string(doc["scenario_id"], {"scenario_id"});
  if (doc.contains("figure_tag")) c.figure_tag = rd.string(doc["figure_tag"], {"figure_tag"});
  if (doc.contains("arrival")) c.arrival = parse_distribution(rd, doc["arrival"], {"arrival"});
  if (doc.contains("harvest")) c.harvest = parse_distribution(rd, doc["harvest"], {"harvest"});
  if (doc.contains("sensing")) {
    if (doc["sensing"].is_null()) c.sensing.reset();
    else c.sensing = parse_distribution(rd, doc["sensing"], {"sensing"});
  }
  if (doc.contains("fading")) {
    if (doc["fading"].is_null()) c.fading.reset();
    else c.fading = parse_fading(rd, doc["fading"], {"fading"});
  }
  if (doc.contains("rate_function")) c.rf = parse_rate(rd, doc["rate_function"], {"rate_function"});
  if (doc.contains("policy") && doc.contains("policies"))
    rd.fail({"policies"}, "give either 'policy' or 'policies', not both");
  if (doc.contains("policy")) out.policies = {parse_policy(rd, doc["policy"], {"policy"})};
  if (doc.contains("policies")) {
    const json& list = doc["policies"];
    if (!list.is_array() || list.empty()) rd.fail({"policies"}, "expected a non-empty array");
    out.policies.clear();
    for (std::size_t i = 0; i < list.size(); ++i)
      out.policies.push_back(parse_policy(rd, list[i], {"policies", std::to_string(i)}));
  }
  if (doc.contains("energy_cap")) c.energy_cap = rd.number(doc["energy_cap"], {"energy_cap"});
  if (doc.contains("data_cap")) c.data_cap = rd.number(doc["data_cap"], {"data_cap"});
  if (doc.contains("queue_quantum"))
    c.queue_quantum = rd.number(doc["queue_quantum"], {"queue_quantum"});
  if (doc.contains("horizon")) {
    c.horizon = rd.integer(doc["horizon"], {"horizon"});
    c.warmup = c.horizon / 10;
  }
  if (doc.contains("warmup")) c.warmup = rd.integer(doc["warmup"], {"warmup"});
  if (doc.contains("replications"))
    c.replications = static_cast<int>(rd.integer(doc["replications"], {"replications"}));
  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      rd.fail({"seed"}, "expected a nonnegative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("sweep")) {
    const json& s = doc["sweep"];
    if (s.is_object()) {
      rd.allow(s, {"sweep"}, {"ex"});
      out.sweep = s.contains("ex") ? rd.numbers(s["ex"], {"sweep", "ex"}) : std::vector<double>{};
    } else {
      out.sweep = rd.numbers(s, {"sweep"});
    }
    for (std::size_t i = 1; i < out.sweep.size(); ++i)
      if (!(out.sweep[i] > out.sweep[i - 1])) rd.fail({"sweep"}, "grid must be strictly increasing");
  }
  if (doc.contains("mdp")) c.mdp = parse_mdp(rd, doc["mdp"], {"mdp"});

  c.policy = out.policies.front();
  for (const auto& p : out.policies) {
    ScenarioConfig check = c;
    check.policy = p;
    try {
      check.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  out.warnings = overload_warnings(out);
  return out;
}

std::vector<std::string> overload_warnings(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  const ScenarioConfig& c = cfg.base;
  const double ey = c.ey_mean();
  std::vector<double> loads = cfg.sweep;
  if (loads.empty()) loads.push_back(c.ex_mean());
  for (const auto& p : cfg.policies) {
    ScenarioConfig pc = c;
    pc.policy = p;
    const double eps = p.resolved_epsilon(ey);
    double limit = c.rf(std::max(0.0, ey - eps));
    if (c.fading && (p.kind == PolicyKind::WF || p.kind == PolicyKind::MWF)) {
      limit = thresholds(pc).wf_boundary;
    } else if (c.fading && p.kind == PolicyKind::FadingTOLinear) {
      ScenarioConfig scaled = pc;
      scaled.harvest = c.harvest.with_mean(ey - eps);
      limit = thresholds(scaled).fading_TO_linear_boundary;
    }
    std::string over;
    for (double ex : loads)
      if (ex >= limit) over += (over.empty() ? "" : " ") + format_double(ex);
    if (!over.empty())
      out.push_back(std::string(p.name()) + ": E[X] in {" + over + "} is at or above the " +
                    "stability limit " + format_double(limit) + " (overload run)");
  }
  return out;
}

namespace {

json distribution_json(const DistributionSpec& d) {
  return std::visit(
      [](const auto& f) -> json {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Exponential>)
          return {{"family", "exponential"}, {"mean", f.mean}};
        else if constexpr (std::is_same_v<T, Uniform>)
          return {{"family", "uniform"}, {"lo", f.lo}, {"hi", f.hi}};
        else if constexpr (std::is_same_v<T, Erlang>)
          return {{"family", "erlang"}, {"stages", f.stages}, {"mean", f.mean}};
        else if constexpr (std::is_same_v<T, HyperExponential>)
          return {{"family", "hyperexponential"}, {"means", f.means}, {"probs", f.probs}};
        else if constexpr (std::is_same_v<T, TruncatedPoisson>)
          return {{"family", "truncated_poisson"}, {"lambda", f.lambda}, {"cutoff", f.cutoff}};
        else if constexpr (std::is_same_v<T, DiscretePmf>)
          return {{"family", "discrete"}, {"values", f.values}, {"probs", f.probs}};
        else
          return {{"family", "deterministic"}, {"value", f.value}};
      },
      d.family());
}

json cap_json(double v) { return std::isinf(v) ? json("inf") : json(v); }

}  // namespace

std::string to_json(const ExperimentConfig& cfg) {
  const ScenarioConfig& c = cfg.base;
  json j;
  j["version"] = kConfigVersion;
  j["scenario_id"] = c.scenario_id;
  j["figure_tag"] = c.figure_tag;
  j["arrival"] = distribution_json(c.arrival);
  j["harvest"] = distribution_json(c.harvest);
  if (c.sensing) j["sensing"] = distribution_json(*c.sensing);
  if (c.fading) j["fading"] = {{"values", c.fading->values}, {"probs", c.fading->probs}};
  static const char* families[] = {"linear", "loge", "log2", "halflog"};
  j["rate_function"] = {{"family", families[static_cast<int>(c.rf.family())]},
                        {"coeff", c.rf.coeff()}};
  json pol = json::array();
  for (const auto& p : cfg.policies) {
    json o = {{"name", std::string(p.name())}, {"c", p.c}, {"outer", p.outer},
              {"inner", p.inner}, {"c_power", p.c_power}};
    o["epsilon"] = p.resolved_epsilon(c.ey_mean());
    pol.push_back(o);
  }
  j["policies"] = pol;
  j["energy_cap"] = cap_json(c.energy_cap);
  j["data_cap"] = cap_json(c.data_cap);
  j["queue_quantum"] = c.queue_quantum;
  j["horizon"] = c.horizon;
  j["warmup"] = c.warmup;
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  if (!cfg.sweep.empty()) j["sweep"] = {{"ex", cfg.sweep}};
  if (c.mdp)
    j["mdp"] = {{"n_q", c.mdp->n_q}, {"n_e", c.mdp->n_e}, {"q_step", c.mdp->q_step},
                {"e_step", c.mdp->e_step}, {"overflow_penalty", c.mdp->overflow_penalty}};
  return j.dump(2);
}

}  // namespace ehnode
