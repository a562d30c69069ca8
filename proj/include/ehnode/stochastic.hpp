#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace ehnode {

class RateFunction;

struct Exponential {
  double mean;
};
struct Uniform {
  double lo, hi;
};
struct Erlang {
  int stages;
  double mean;
};
struct HyperExponential {
  std::vector<double> means;
  std::vector<double> probs;
};
struct TruncatedPoisson {
  double lambda;
  int cutoff;
};
struct DiscretePmf {
  std::vector<double> values;
  std::vector<double> probs;
};
struct Deterministic {
  double value;
};

/// Parametric description of an i.i.d. nonnegative source. Construction
/// validates the parameters and throws std::invalid_argument on violation,
/// so every live DistributionSpec is well formed.
class DistributionSpec {
 public:
  using Family = std::variant<Exponential, Uniform, Erlang, HyperExponential,
                              TruncatedPoisson, DiscretePmf, Deterministic>;

  DistributionSpec(Family family);  // NOLINT(google-explicit-constructor)

  const Family& family() const { return family_; }
  std::string name() const;

  bool is_discrete() const;
  /// Support points and probabilities for discrete families.
  DiscretePmf as_pmf() const;

  /// Same family rescaled to a new mean. The truncated Poisson is refitted,
  /// so this throws std::domain_error if the new mean is not attainable.
  DistributionSpec with_mean(double mean) const;

  template <class T>
  const T* get_if() const {
    return std::get_if<T>(&family_);
  }

 private:
  Family family_;
};

/// Five-component hyperexponential with component means
/// {1, 2, 3, 6, 10} * mean / 4.9 and weights {0.1, 0.2, 0.2, 0.3, 0.2}.
DistributionSpec staggered_hyperexponential(double mean);

/// Truncated Poisson with rate fitted so the conditional mean equals `mean`.
DistributionSpec truncated_poisson_with_mean(double mean, int cutoff);

double dist_mean(const DistributionSpec& spec);
double dist_variance(const DistributionSpec& spec);

/// Probabilities of Poisson(lambda) conditioned on {0..cutoff}.
std::vector<double> truncated_poisson_pmf(double lambda, int cutoff);

/// Rate whose truncated mean matches `target_mean` (bisection, 1e-10).
double fit_truncated_poisson(double target_mean, int cutoff);

/// E[g(Y)], or E[g(hY)] when a fading pmf is given. Discrete families are
/// summed exactly; continuous ones are integrated adaptively to 1e-4 abs.
double expected_g(const DistributionSpec& spec, const RateFunction& rf,
                  const std::optional<DiscretePmf>& fading = std::nullopt);

/// Reproducible variate stream. One stream per (process, replication);
/// the engine is std::mt19937_64 seeded through splitmix64 of
/// (seed, substream), and all variates are built from its raw 64-bit
/// output so sequences are identical across standard libraries.
class SampleStream {
 public:
  SampleStream(DistributionSpec spec, std::uint64_t seed,
               std::uint64_t substream);

  double sample();
  const DistributionSpec& spec() const { return spec_; }

 private:
  double uniform01();  // [0, 1)
  double pick_discrete(const std::vector<double>& values);

  DistributionSpec spec_;
  std::mt19937_64 engine_;
  std::vector<double> cumulative_;
  std::vector<double> support_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace ehnode
