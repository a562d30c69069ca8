#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "ehnode/rate.hpp"

namespace ehnode {

struct PolicyTable;

enum class PolicyKind {
  TO,
  Greedy,
  MTO,
  Unbuffered,
  UnfadedTO,
  FadingTOLinear,
  WF,
  MWF,
  ConstantPower,
  MdpTable,
};

/// Exact config/CSV token: "TO", "GREEDY", ..., "MDP_OPTIMAL".
std::string_view policy_name(PolicyKind kind);
/// Inverse of policy_name; throws std::invalid_argument on unknown names.
PolicyKind policy_kind_from_name(std::string_view name);

bool needs_fading(PolicyKind kind);

struct PolicySpec {
  PolicyKind kind = PolicyKind::TO;
  /// Slack below E[Y] for TO-style rules; unset means 0.01 * E[Y].
  std::optional<double> epsilon;
  /// Queue weight in the (e - c q)^+ boost of MTO and MWF.
  double c = 0.1;
  double outer = 0.99;
  double inner = 0.001;
  /// Constant transmit energy for ConstantPower.
  double c_power = 0.0;
  std::shared_ptr<const PolicyTable> table;

  std::string_view name() const { return policy_name(kind); }
  double resolved_epsilon(double ey) const { return epsilon.value_or(0.01 * ey); }
  void validate() const;

  static PolicySpec make(PolicyKind kind) {
    PolicySpec p;
    p.kind = kind;
    return p;
  }
};

/// Everything a rule may observe in one slot.
struct DecisionContext {
  double q = 0.0;       // backlog, bits
  double e = 0.0;       // stored energy
  double h = 1.0;       // channel gain (1 without fading)
  double y_prev = 0.0;  // previous slot's harvest
  double ey = 0.0;      // E[Y]
  double h0 = 0.0;      // water level, WF/MWF only
  double h_max = 1.0;   // top fading state
  double p_h_max = 1.0; // its probability
  RateFunction rf = RateFunction::linear(1.0);
};

/// Transmit energy for this slot, always in [0, ctx.e].
double decide(const PolicySpec& policy, const DecisionContext& ctx);

/// Energy spent beyond what serving min(q, g(hT)) bits needed.
double wasted_energy(const PolicySpec& policy, const DecisionContext& ctx, double T);

}  // namespace ehnode
