#include "ehnode/stochastic.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ehnode/rate.hpp"

namespace ehnode {

namespace {

constexpr double kProbTol = 1e-12;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }
bool nonneg_finite(double x) { return std::isfinite(x) && x >= 0.0; }

void check_probs(const std::vector<double>& probs, const char* what) {
  if (probs.empty()) {
    throw std::invalid_argument(std::string(what) + ": empty probability list");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument(std::string(what) +
                                  ": probability outside [0, 1]");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kProbTol) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": probabilities sum to " << total << ", expected 1";
    throw std::invalid_argument(os.str());
  }
}

void validate(const DistributionSpec::Family& f) {
  std::visit(
      overloaded{
          [](const Exponential& d) {
            if (!positive_finite(d.mean))
              throw std::invalid_argument("exponential: mean must be > 0");
          },
          [](const Uniform& d) {
            if (!nonneg_finite(d.lo) || !nonneg_finite(d.hi) || d.lo > d.hi)
              throw std::invalid_argument("uniform: need 0 <= lo <= hi");
          },
          [](const Erlang& d) {
            if (d.stages < 1)
              throw std::invalid_argument("erlang: stages must be >= 1");
            if (!positive_finite(d.mean))
              throw std::invalid_argument("erlang: mean must be > 0");
          },
          [](const HyperExponential& d) {
            if (d.means.size() != d.probs.size())
              throw std::invalid_argument(
                  "hyperexponential: means and probs differ in length");
            for (double m : d.means)
              if (!positive_finite(m))
                throw std::invalid_argument(
                    "hyperexponential: component means must be > 0");
            check_probs(d.probs, "hyperexponential");
          },
          [](const TruncatedPoisson& d) {
            if (!positive_finite(d.lambda))
              throw std::invalid_argument("truncated_poisson: lambda must be > 0");
            if (d.cutoff < 1)
              throw std::invalid_argument("truncated_poisson: cutoff must be >= 1");
          },
          [](const DiscretePmf& d) {
            if (d.values.size() != d.probs.size())
              throw std::invalid_argument(
                  "discrete: values and probs differ in length");
            for (double v : d.values)
              if (!nonneg_finite(v))
                throw std::invalid_argument("discrete: values must be >= 0");
            check_probs(d.probs, "discrete");
          },
          [](const Deterministic& d) {
            if (!nonneg_finite(d.value))
              throw std::invalid_argument("deterministic: value must be >= 0");
          },
      },
      f);
}

double pmf_mean(const DiscretePmf& pmf) {
  double m = 0.0;
  for (std::size_t i = 0; i < pmf.values.size(); ++i)
    m += pmf.values[i] * pmf.probs[i];
  return m;
}

double truncated_mean(double lambda, int cutoff) {
  auto p = truncated_poisson_pmf(lambda, cutoff);
  double m = 0.0;
  for (int k = 0; k <= cutoff; ++k) m += k * p[static_cast<std::size_t>(k)];
  return m;
}

template <class F>
double integrate_half_line(F&& f) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 31>::integrate(
      f, 0.0, std::numeric_limits<double>::infinity(), 20, 1e-12);
}

template <class F>
double integrate_interval(F&& f, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 31>::integrate(f, a, b, 20, 1e-12);
}

// E[g(gain * Y)] for a single gain.
double expected_g_single(const DistributionSpec& spec, const RateFunction& rf,
                         double gain) {
  if (gain == 0.0) return 0.0;
  auto g = [&](double y) { return rf(gain * y); };
  return std::visit(
      overloaded{
          [&](const Exponential& d) {
            return integrate_half_line(
                [&](double y) { return g(y) * std::exp(-y / d.mean) / d.mean; });
          },
          [&](const Uniform& d) {
            if (d.hi == d.lo) return g(d.lo);
            return integrate_interval(g, d.lo, d.hi) / (d.hi - d.lo);
          },
          [&](const Erlang& d) {
            const double theta = d.mean / d.stages;
            const double log_norm =
                d.stages * std::log(theta) + std::lgamma(double(d.stages));
            return integrate_half_line([&](double y) {
              if (y <= 0.0) return d.stages == 1 ? g(0.0) / theta : 0.0;
              return g(y) * std::exp((d.stages - 1) * std::log(y) - y / theta -
                                     log_norm);
            });
          },
          [&](const HyperExponential& d) {
            double total = 0.0;
            for (std::size_t i = 0; i < d.means.size(); ++i) {
              const double m = d.means[i];
              total += d.probs[i] * integrate_half_line([&](double y) {
                         return g(y) * std::exp(-y / m) / m;
                       });
            }
            return total;
          },
          [&](const TruncatedPoisson&) {
            auto pmf = spec.as_pmf();
            double total = 0.0;
            for (std::size_t i = 0; i < pmf.values.size(); ++i)
              total += pmf.probs[i] * g(pmf.values[i]);
            return total;
          },
          [&](const DiscretePmf& d) {
            double total = 0.0;
            for (std::size_t i = 0; i < d.values.size(); ++i)
              total += d.probs[i] * g(d.values[i]);
            return total;
          },
          [&](const Deterministic& d) { return g(d.value); },
      },
      spec.family());
}

}  // namespace

DistributionSpec::DistributionSpec(Family family) : family_(std::move(family)) {
  validate(family_);
}

std::string DistributionSpec::name() const {
  std::ostringstream os;
  os.precision(10);
  std::visit(overloaded{
                 [&](const Exponential& d) { os << "EXP(" << d.mean << ")"; },
                 [&](const Uniform& d) {
                   os << "UNIF(" << d.lo << "," << d.hi << ")";
                 },
                 [&](const Erlang& d) {
                   os << "ERLANG(" << d.stages << "," << d.mean << ")";
                 },
                 [&](const HyperExponential& d) {
                   os << "HYPEREXP(" << d.means.size() << ")";
                 },
                 [&](const TruncatedPoisson& d) {
                   os << "TPOISSON(" << d.lambda << "," << d.cutoff << ")";
                 },
                 [&](const DiscretePmf& d) {
                   os << "PMF(" << d.values.size() << ")";
                 },
                 [&](const Deterministic& d) { os << "DET(" << d.value << ")"; },
             },
             family_);
  return os.str();
}

bool DistributionSpec::is_discrete() const {
  return std::holds_alternative<TruncatedPoisson>(family_) ||
         std::holds_alternative<DiscretePmf>(family_) ||
         std::holds_alternative<Deterministic>(family_);
}

DiscretePmf DistributionSpec::as_pmf() const {
  if (auto* d = get_if<DiscretePmf>()) return *d;
  if (auto* d = get_if<Deterministic>()) return {{d->value}, {1.0}};
  if (auto* d = get_if<TruncatedPoisson>()) {
    DiscretePmf pmf;
    pmf.probs = truncated_poisson_pmf(d->lambda, d->cutoff);
    for (int k = 0; k <= d->cutoff; ++k) pmf.values.push_back(k);
    return pmf;
  }
  throw std::domain_error("as_pmf: " + name() + " is not a discrete family");
}

DistributionSpec DistributionSpec::with_mean(double mean) const {
  if (!nonneg_finite(mean)) throw std::domain_error("with_mean: mean must be >= 0");
  const double old = dist_mean(*this);
  auto scale = [&]() {
    if (old <= 0.0)
      throw std::domain_error("with_mean: cannot rescale a zero-mean " + name());
    return mean / old;
  };
  return std::visit(
      overloaded{
          [&](const Exponential&) { return DistributionSpec{Exponential{mean}}; },
          [&](const Uniform& d) {
            const double s = scale();
            return DistributionSpec{Uniform{d.lo * s, d.hi * s}};
          },
          [&](const Erlang& d) { return DistributionSpec{Erlang{d.stages, mean}}; },
          [&](const HyperExponential& d) {
            const double s = scale();
            HyperExponential h = d;
            for (double& m : h.means) m *= s;
            return DistributionSpec{h};
          },
          [&](const TruncatedPoisson& d) {
            return truncated_poisson_with_mean(mean, d.cutoff);
          },
          [&](const DiscretePmf& d) {
            const double s = scale();
            DiscretePmf p = d;
            for (double& v : p.values) v *= s;
            return DistributionSpec{p};
          },
          [&](const Deterministic&) { return DistributionSpec{Deterministic{mean}}; },
      },
      family_);
}

DistributionSpec staggered_hyperexponential(double mean) {
  HyperExponential h;
  for (double k : {1.0, 2.0, 3.0, 6.0, 10.0}) h.means.push_back(k * mean / 4.9);
  h.probs = {0.1, 0.2, 0.2, 0.3, 0.2};
  return DistributionSpec{h};
}

DistributionSpec truncated_poisson_with_mean(double mean, int cutoff) {
  return DistributionSpec{TruncatedPoisson{fit_truncated_poisson(mean, cutoff), cutoff}};
}

std::vector<double> truncated_poisson_pmf(double lambda, int cutoff) {
  std::vector<double> logw(static_cast<std::size_t>(cutoff) + 1);
  for (int k = 0; k <= cutoff; ++k)
    logw[static_cast<std::size_t>(k)] = k * std::log(lambda) - std::lgamma(k + 1.0);
  const double top = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (double& w : logw) {
    w = std::exp(w - top);
    total += w;
  }
  for (double& w : logw) w /= total;
  return logw;
}

double fit_truncated_poisson(double target_mean, int cutoff) {
  if (cutoff < 1) throw std::domain_error("fit_truncated_poisson: cutoff must be >= 1");
  if (!(target_mean > 0.0 && target_mean < cutoff))
    throw std::domain_error("fit_truncated_poisson: need 0 < mean < cutoff");
  // The truncated mean increases strictly in lambda from 0 towards cutoff.
  double lo = 0.0;
  double hi = std::max(1.0, target_mean);
  while (truncated_mean(hi, cutoff) < target_mean) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw std::domain_error("fit_truncated_poisson: no bracket");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (truncated_mean(mid, cutoff) < target_mean)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double dist_mean(const DistributionSpec& spec) {
  return std::visit(
      overloaded{
          [](const Exponential& d) { return d.mean; },
          [](const Uniform& d) { return 0.5 * (d.lo + d.hi); },
          [](const Erlang& d) { return d.mean; },
          [](const HyperExponential& d) {
            return std::inner_product(d.means.begin(), d.means.end(),
                                      d.probs.begin(), 0.0);
          },
          [](const TruncatedPoisson& d) { return truncated_mean(d.lambda, d.cutoff); },
          [](const DiscretePmf& d) { return pmf_mean(d); },
          [](const Deterministic& d) { return d.value; },
      },
      spec.family());
}

double dist_variance(const DistributionSpec& spec) {
  const double m = dist_mean(spec);
  return std::visit(
      overloaded{
          [](const Exponential& d) { return d.mean * d.mean; },
          [](const Uniform& d) { return (d.hi - d.lo) * (d.hi - d.lo) / 12.0; },
          [](const Erlang& d) { return d.mean * d.mean / d.stages; },
          [m](const HyperExponential& d) {
            double second = 0.0;
            for (std::size_t i = 0; i < d.means.size(); ++i)
              second += d.probs[i] * 2.0 * d.means[i] * d.means[i];
            return second - m * m;
          },
          [&spec, m](const TruncatedPoisson&) {
            auto pmf = spec.as_pmf();
            double v = 0.0;
            for (std::size_t i = 0; i < pmf.values.size(); ++i)
              v += pmf.probs[i] * (pmf.values[i] - m) * (pmf.values[i] - m);
            return v;
          },
          [m](const DiscretePmf& d) {
            double v = 0.0;
            for (std::size_t i = 0; i < d.values.size(); ++i)
              v += d.probs[i] * (d.values[i] - m) * (d.values[i] - m);
            return v;
          },
          [](const Deterministic&) { return 0.0; },
      },
      spec.family());
}

double expected_g(const DistributionSpec& spec, const RateFunction& rf,
                  const std::optional<DiscretePmf>& fading) {
  if (!fading) return expected_g_single(spec, rf, 1.0);
  DistributionSpec checked{*fading};  // validates the pmf
  double total = 0.0;
  for (std::size_t i = 0; i < fading->values.size(); ++i)
    total += fading->probs[i] * expected_g_single(spec, rf, fading->values[i]);
  return total;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

SampleStream::SampleStream(DistributionSpec spec, std::uint64_t seed,
                           std::uint64_t substream)
    : spec_(std::move(spec)),
      engine_(splitmix64(seed ^ splitmix64(substream + 0x5851F42D4C957F2DULL))) {
  auto build = [this](const DiscretePmf& pmf) {
    support_ = pmf.values;
    cumulative_.resize(pmf.probs.size());
    std::partial_sum(pmf.probs.begin(), pmf.probs.end(), cumulative_.begin());
    cumulative_.back() = std::numeric_limits<double>::infinity();
  };
  if (auto* h = spec_.get_if<HyperExponential>()) {
    build(DiscretePmf{h->means, h->probs});
  } else if (spec_.is_discrete() && !spec_.get_if<Deterministic>()) {
    build(spec_.as_pmf());
  }
}

double SampleStream::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SampleStream::pick_discrete(const std::vector<double>& values) {
  const double u = uniform01();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return values[static_cast<std::size_t>(it - cumulative_.begin())];
}

double SampleStream::sample() {
  return std::visit(
      overloaded{
          [this](const Exponential& d) { return -d.mean * std::log1p(-uniform01()); },
          [this](const Uniform& d) { return d.lo + (d.hi - d.lo) * uniform01(); },
          [this](const Erlang& d) {
            double s = 0.0;
            for (int i = 0; i < d.stages; ++i) s -= std::log1p(-uniform01());
            return s * d.mean / d.stages;
          },
          [this](const HyperExponential&) {
            const double m = pick_discrete(support_);
            return -m * std::log1p(-uniform01());
          },
          [this](const TruncatedPoisson&) { return pick_discrete(support_); },
          [this](const DiscretePmf&) { return pick_discrete(support_); },
          [](const Deterministic& d) { return d.value; },
      },
      spec_.family());
}

}  // namespace ehnode
