#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ehnode/sim.hpp"

namespace ehnode {

/// A scenario plus the policy list and load grid a sweep runs over.
struct ExperimentConfig {
  ScenarioConfig base;            // base.policy is policies.front()
  std::vector<PolicySpec> policies;
  std::vector<double> sweep;      // E[X] grid, may be empty
  std::vector<std::string> warnings;
};

inline constexpr int kConfigVersion = 1;

/// Parses a JSON config. A "preset" key starts from that preset; other keys
/// override it. Throws ConfigError naming the key path and, when it can be
/// located, the line.
ExperimentConfig parse_config(std::string_view text);

/// Throws ConfigError for unknown names.
ExperimentConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Overload warnings for the base load and every sweep point.
std::vector<std::string> overload_warnings(const ExperimentConfig& cfg);

/// JSON echo of a resolved experiment, used in run manifests.
std::string to_json(const ExperimentConfig& cfg);

}  // namespace ehnode
