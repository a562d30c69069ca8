#include "ehnode/rate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ehnode {

RateFunction::RateFunction(RateFamily family, double coeff)
    : family_(family), coeff_(coeff) {
  if (!(std::isfinite(coeff) && coeff > 0.0))
    throw std::invalid_argument("rate function coefficient must be > 0");
}

std::string RateFunction::name() const {
  std::ostringstream os;
  os.precision(10);
  switch (family_) {
    case RateFamily::Linear: os << "LINEAR"; break;
    case RateFamily::LogE: os << "LOGE"; break;
    case RateFamily::Log2: os << "LOG2"; break;
    case RateFamily::ShannonHalfLog: os << "HALFLOG"; break;
  }
  os << "(" << coeff_ << ")";
  return os.str();
}

double RateFunction::operator()(double x) const {
  switch (family_) {
    case RateFamily::Linear: return coeff_ * x;
    case RateFamily::LogE: return std::log1p(coeff_ * x);
    case RateFamily::Log2: return std::log1p(coeff_ * x) / std::log(2.0);
    case RateFamily::ShannonHalfLog: return 0.5 * std::log1p(coeff_ * x);
  }
  return 0.0;
}

double g_eval(const RateFunction& rf, double x) {
  if (!(x >= 0.0)) throw std::domain_error("g_eval: negative energy");
  return rf(x);
}

double g_inverse(const RateFunction& rf, double r) {
  if (!(r >= 0.0)) throw std::domain_error("g_inverse: negative rate");
  const double c = rf.coeff();
  switch (rf.family()) {
    case RateFamily::Linear: return r / c;
    case RateFamily::LogE: return std::expm1(r) / c;
    case RateFamily::Log2: return std::expm1(r * std::log(2.0)) / c;
    case RateFamily::ShannonHalfLog: return std::expm1(2.0 * r) / c;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double waterfill_power(const DiscretePmf& fading, double h0) {
  const double level = 1.0 / h0;
  double power = 0.0;
  for (std::size_t i = 0; i < fading.values.size(); ++i) {
    const double h = fading.values[i];
    if (h <= 0.0) continue;
    power += fading.probs[i] * std::max(level - 1.0 / h, 0.0);
  }
  return power;
}

double waterfill_level(const DiscretePmf& fading, double budget) {
  if (!(budget > 0.0) || !std::isfinite(budget))
    throw std::domain_error("waterfill_level: budget must be > 0");
  double h_max = 0.0;
  double p_max = 0.0;
  for (std::size_t i = 0; i < fading.values.size(); ++i) {
    if (fading.values[i] > h_max && fading.probs[i] > 0.0) {
      h_max = fading.values[i];
      p_max = fading.probs[i];
    }
  }
  if (h_max <= 0.0)
    throw std::domain_error("waterfill_level: fading has no positive gain");

  // Bisect on the water level w = 1/h0; power(w) is continuous and
  // nondecreasing, zero at w = 1/h_max and >= budget at the upper end.
  double lo = 1.0 / h_max;
  double hi = 1.0 / h_max + budget / p_max;
  auto power_at = [&](double w) { return waterfill_power(fading, 1.0 / w); };
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (power_at(mid) < budget)
      lo = mid;
    else
      hi = mid;
  }
  const double w = std::abs(power_at(lo) - budget) <= std::abs(power_at(hi) - budget)
                       ? lo
                       : hi;
  return 1.0 / w;
}

}  // namespace ehnode
