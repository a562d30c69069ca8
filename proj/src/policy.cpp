#include "ehnode/policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "ehnode/mdp.hpp"

namespace ehnode {

namespace {

constexpr std::array<std::pair<PolicyKind, std::string_view>, 10> kNames{{
    {PolicyKind::TO, "TO"},
    {PolicyKind::Greedy, "GREEDY"},
    {PolicyKind::MTO, "MTO"},
    {PolicyKind::Unbuffered, "UNBUFFERED"},
    {PolicyKind::UnfadedTO, "UNFADED_TO"},
    {PolicyKind::FadingTOLinear, "FADING_TO_LINEAR"},
    {PolicyKind::WF, "WF"},
    {PolicyKind::MWF, "MWF"},
    {PolicyKind::ConstantPower, "CONST_POWER"},
    {PolicyKind::MdpTable, "MDP_OPTIMAL"},
}};

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

std::string_view policy_name(PolicyKind kind) {
  for (const auto& [k, n] : kNames)
    if (k == kind) return n;
  return "?";
}

PolicyKind policy_kind_from_name(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  throw std::invalid_argument("unknown policy '" + std::string(name) + "'");
}

bool needs_fading(PolicyKind kind) {
  return kind == PolicyKind::WF || kind == PolicyKind::MWF ||
         kind == PolicyKind::FadingTOLinear;
}

void PolicySpec::validate() const {
  if (epsilon && !(*epsilon > 0.0))
    throw std::invalid_argument(std::string(name()) + ": epsilon must be > 0");
  if ((kind == PolicyKind::MTO || kind == PolicyKind::MWF) && !(c > 0.0))
    throw std::invalid_argument(std::string(name()) + ": c must be > 0");
  if (!(outer > 0.0) || !(inner >= 0.0))
    throw std::invalid_argument(std::string(name()) + ": bad outer/inner coefficients");
  if (kind == PolicyKind::ConstantPower && !(c_power >= 0.0))
    throw std::invalid_argument("CONST_POWER: c_power must be >= 0");
  if (kind == PolicyKind::MdpTable && !table)
    throw std::invalid_argument("MDP_OPTIMAL: no solved policy table attached");
}

double decide(const PolicySpec& policy, const DecisionContext& ctx) {
  const double e = ctx.e;
  const double eps = policy.resolved_epsilon(ctx.ey);
  auto f = [&](double bits) { return g_inverse(ctx.rf, bits); };
  auto boost = [&] { return policy.inner * positive_part(e - policy.c * ctx.q); };

  double t = 0.0;
  switch (policy.kind) {
    case PolicyKind::TO:
    case PolicyKind::UnfadedTO:
      t = ctx.ey - eps;
      break;
    case PolicyKind::Greedy:
      t = f(ctx.q);
      break;
    case PolicyKind::MTO:
      t = std::min(f(ctx.q), policy.outer * (ctx.ey + boost()));
      break;
    case PolicyKind::Unbuffered:
      t = ctx.y_prev;
      break;
    case PolicyKind::FadingTOLinear:
      t = ctx.h >= ctx.h_max ? (ctx.ey - eps) / ctx.p_h_max : 0.0;
      break;
    case PolicyKind::WF:
    case PolicyKind::MWF: {
      const double gain = ctx.rf.snr_scale() * ctx.h;
      if (gain <= 0.0) {
        t = 0.0;
        break;
      }
      const double alloc = 1.0 / ctx.h0 - 1.0 / gain;
      if (policy.kind == PolicyKind::WF) {
        t = alloc;
      } else {
        t = std::min(f(ctx.q), positive_part(alloc + boost()));
      }
      break;
    }
    case PolicyKind::ConstantPower:
      t = policy.c_power;
      break;
    case PolicyKind::MdpTable:
      if (!policy.table) throw std::logic_error("MDP_OPTIMAL without a table");
      t = table_action(*policy.table, ctx.q, e);
      break;
  }
  if (!(t > 0.0)) return 0.0;
  return std::min(t, e);
}

double wasted_energy([[maybe_unused]] const PolicySpec& policy,
                     const DecisionContext& ctx, double T) {
  if (T <= 0.0) return 0.0;
  if (ctx.h <= 0.0) return T;
  const double served = std::min(ctx.q, ctx.rf(ctx.h * T));
  const double needed = g_inverse(ctx.rf, served) / ctx.h;
  const double waste = T - needed;
  return waste > 1e-12 * T ? waste : 0.0;
}

}  // namespace ehnode
