#pragma once

#include <iosfwd>
#include <limits>
#include <utility>
#include <vector>

#include "ehnode/rate.hpp"
#include "ehnode/stochastic.hpp"

namespace ehnode {

struct MdpGrid {
  int n_q = 51;
  int n_e = 51;
  double q_step = 1.0;
  double e_step = 1.0;
  /// Cost per dropped bit at the data-buffer ceiling. Zero keeps the pure
  /// backlog cost; a positive value stops the solver from exploiting drops.
  double overflow_penalty = 0.0;
};

/// Quantized controlled chain on (q, e) levels. Actions are energy-grid
/// levels 0..e, so e - t stays on the grid. The post-service backlog
/// (q - g(t))^+ is rounded to the nearest q level before arrivals land.
class MdpModel {
 public:
  MdpModel(const MdpGrid& grid, std::vector<double> arrival_pmf,
           std::vector<double> harvest_pmf, RateFunction rf);

  int n_q() const { return grid_.n_q; }
  int n_e() const { return grid_.n_e; }
  int states() const { return grid_.n_q * grid_.n_e; }
  const MdpGrid& grid() const { return grid_; }
  const RateFunction& rf() const { return rf_; }
  /// Probability of an arrival of i q-levels (resp. harvest of i e-levels).
  const std::vector<double>& arrival_pmf() const { return px_; }
  const std::vector<double>& harvest_pmf() const { return py_; }

  int index(int q, int e) const { return q * grid_.n_e + e; }
  int post_level(int q, int action) const {
    return post_[static_cast<std::size_t>(q * grid_.n_e + action)];
  }
  /// Expected bits dropped at the ceiling from post-service level qp.
  double expected_drop(int qp) const { return drop_[static_cast<std::size_t>(qp)]; }
  double cost(int q) const { return q * grid_.q_step; }
  double stage_cost(int q, int action) const {
    return cost(q) + grid_.overflow_penalty * expected_drop(post_level(q, action));
  }

  /// Sparse next-state distribution (duplicates merged).
  std::vector<std::pair<int, double>> transition_row(int q, int e, int action) const;

  /// Action level min(e, round(f(q) / e_step)).
  int greedy_action(int q, int e) const;

 private:
  MdpGrid grid_;
  std::vector<double> px_, py_;
  RateFunction rf_;
  std::vector<int> post_;
  std::vector<double> drop_;
};

/// Throws ConfigError unless arrival/harvest are discrete with support on
/// multiples of the q/e steps.
MdpModel build_model(const MdpGrid& grid, const DistributionSpec& arrival,
                     const DistributionSpec& harvest, const RateFunction& rf);

/// Solved per-state action levels and values. For discounted solves
/// `alpha` < 1 and `value` is v_alpha; for average-cost solves `alpha` is 1,
/// `gain` is set and `value` holds the bias normalized at state (0, 0).
struct PolicyTable {
  int n_q = 0;
  int n_e = 0;
  double q_step = 1.0;
  double e_step = 1.0;
  double alpha = 1.0;
  double gain = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> action;
  std::vector<double> value;
  int iterations = 0;
  /// Sup-norm change per VI sweep (span for relative VI).
  std::vector<double> residuals;

  int action_at(int q, int e) const { return action[static_cast<std::size_t>(q * n_e + e)]; }
  double value_at(int q, int e) const { return value[static_cast<std::size_t>(q * n_e + e)]; }
};

/// Transmit energy for a continuous (q, e) read off the table: q rounded to
/// the nearest level, e floored. Throws std::domain_error off the grid.
double table_action(const PolicyTable& table, double q, double e);

struct SolverOptions {
  double tol = 1e-8;
  /// Relative slack for treating two action values as tied; ties go to the
  /// smallest action.
  double tie_tol = 1e-9;
  int max_iterations = 2'000'000;
};

/// alpha-discounted value iteration from v = 0, stopping once the sup-norm
/// change drops below tol (1 - alpha) / (2 alpha).
PolicyTable value_iterate(const MdpModel& model, double alpha,
                          const SolverOptions& opt = {});

enum class AverageCostMethod { PolicyIteration, RelativeValueIteration };
enum class SolveStatus { Ok, Multichain, NotConverged };

struct AverageCostResult {
  SolveStatus status = SolveStatus::Ok;
  double gain = std::numeric_limits<double>::quiet_NaN();
  PolicyTable table;
};

AverageCostResult average_cost_solve(const MdpModel& model, AverageCostMethod method,
                                     const SolverOptions& opt = {});

/// Stationary distribution of the chain induced by a table, by repeated
/// multiplication until the L1 change is below tol.
std::vector<double> stationary_distribution(const MdpModel& model, const PolicyTable& table,
                                            double tol = 1e-12, int max_iter = 1'000'000);

struct GridPoint {
  int q, e;
};

struct StructureReport {
  std::vector<GridPoint> q_violations;  // v(q+1, e) < v(q, e)
  std::vector<GridPoint> e_violations;  // v(q, e+1) > v(q, e)
  bool ok() const { return q_violations.empty() && e_violations.empty(); }
};

/// Nondecreasing in q, nonincreasing in e, up to tol * max(1, |v|).
StructureReport structure_checks(const PolicyTable& vf, double tol = 1e-9);

struct VanishingDiscountPoint {
  double alpha;
  double scaled_min;    // (1 - alpha) * min v_alpha
  double relative_gap;  // |scaled_min - gain| / gain
};

std::vector<VanishingDiscountPoint> vanishing_discount(const MdpModel& model,
                                                       const std::vector<double>& alphas,
                                                       double gain,
                                                       const SolverOptions& opt = {});

/// States whose table action differs from the greedy grid action.
std::vector<GridPoint> greedy_mismatches(const MdpModel& model, const PolicyTable& table);

/// Fraction of stationary mass in the top `fraction` of q levels.
double boundary_occupancy(const MdpModel& model, const PolicyTable& table,
                          double fraction = 0.1);

/// CSV with header q_level,e_level,action,value.
void write_policy_table_csv(std::ostream& out, const PolicyTable& table);

}  // namespace ehnode
