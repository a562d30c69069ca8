#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ehnode/sim.hpp"

namespace ehnode {

/// Stability boundaries in bits/slot.
struct ThresholdReport {
  double g_of_EY = 0.0;     // TO
  double E_g_of_Y = 0.0;    // Greedy, unbuffered
  double E_g_of_hY = 0.0;   // unfaded TO / Greedy under fading
  double E_g_of_hEY = 0.0;  // TO under fading
  double fading_TO_linear_boundary = 0.0;
  double wf_boundary = 0.0;
  double h0 = 0.0;  // water level behind wf_boundary (0 without fading)
};

/// Without fading the fading-specific fields collapse to their unfaded
/// counterparts.
ThresholdReport thresholds(const ScenarioConfig& cfg);

/// Key/value listing in a fixed order, for CSV export.
std::vector<std::pair<std::string, double>> threshold_fields(const ThresholdReport& r);

struct SweepCell {
  std::string policy;
  double ex_mean = 0.0;
  std::optional<MetricsReport> report;
  std::string error;  // set when the cell failed
};

struct SweepResult {
  ScenarioConfig base;
  std::vector<SweepCell> cells;  // ordered by (policy, load)
};

/// Runs every (policy, E[X]) cell with the base seed, so all policies and
/// loads share the same X, Y, Z, h streams up to the change of mean.
/// `ex_grid` must be strictly increasing. Cells run on up to `jobs` threads;
/// a throwing cell is recorded and the rest continue.
SweepResult sweep(const ScenarioConfig& base, const std::vector<PolicySpec>& policies,
                  const std::vector<double>& ex_grid, int jobs = 1);

/// Scenario with the arrival process rescaled to mean `ex`.
ScenarioConfig at_load(const ScenarioConfig& base, double ex);

/// One row per replication plus an "agg" row per cell.
void write_sweep_csv(std::ostream& out, const SweepResult& result);
void write_metrics_csv(std::ostream& out, const ScenarioConfig& cfg, const MetricsReport& report);

struct SensingPoint {
  double c = 0.0;
  double budget_margin = 0.0;  // E[Y] - c - E[Z]; feasible when > 0
  MetricsReport report;
};

/// CONST_POWER runs over a grid of c with the scenario's sensing cost.
std::vector<SensingPoint> sensing_sweep(const ScenarioConfig& base, const std::vector<double>& cs,
                                        int jobs = 1);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace ehnode
