#pragma once

#include <string>

#include "ehnode/stochastic.hpp"

namespace ehnode {

enum class RateFamily {
  Linear,          // gamma * x
  LogE,            // ln(1 + beta x)
  Log2,            // log2(1 + beta x)
  ShannonHalfLog,  // 0.5 ln(1 + beta x)
};

/// Bits per slot delivered for transmit energy x. Every family has
/// g(0) = 0, is nondecreasing and concave, and is invertible on [0, inf).
class RateFunction {
 public:
  RateFunction(RateFamily family, double coeff);

  static RateFunction linear(double gamma) { return {RateFamily::Linear, gamma}; }
  static RateFunction log_e(double beta) { return {RateFamily::LogE, beta}; }
  static RateFunction log2(double beta) { return {RateFamily::Log2, beta}; }
  static RateFunction half_log(double beta) {
    return {RateFamily::ShannonHalfLog, beta};
  }

  RateFamily family() const { return family_; }
  double coeff() const { return coeff_; }
  bool is_linear() const { return family_ == RateFamily::Linear; }

  /// SNR scale for water-filling: beta for the log families, 1 for linear.
  double snr_scale() const { return is_linear() ? 1.0 : coeff_; }

  /// e.g. "LINEAR(10)", "LOGE(1)".
  std::string name() const;

  double operator()(double x) const;

 private:
  RateFamily family_;
  double coeff_;
};

/// g(x); throws std::domain_error for negative or NaN x.
double g_eval(const RateFunction& rf, double x);

/// f = g^{-1}; throws std::domain_error for negative or NaN r. Returns +inf
/// when the inverse overflows double range.
double g_inverse(const RateFunction& rf, double r);

/// Water level h0 with sum_h p(h) * max(1/h0 - 1/h, 0) = budget, found by
/// bisection. Zero-gain states never receive power. Throws
/// std::domain_error if the pmf has no positive support or budget <= 0.
double waterfill_level(const DiscretePmf& fading, double budget);

/// Expected power sum_h p(h) * max(1/h0 - 1/h, 0).
double waterfill_power(const DiscretePmf& fading, double h0);

}  // namespace ehnode
