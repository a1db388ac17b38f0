#ifndef HBAB_METAPRIOR_HPP
#define HBAB_METAPRIOR_HPP

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hbab/sampler.hpp"
#include "hbab/seqtest.hpp"

namespace hbab {

class MetapriorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EffectObservation {
  double delta = 0.0;
  double noise_sd = 1.0;
};

struct LearntTau {
  double posterior_mean = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
  double q975 = 0.0;
  double point_value = 1e-8;
  bool floored = false;
  std::size_t corpus_size = 0;
  std::vector<std::string> warnings;
};

struct MetapriorOptions {
  double cauchy_scale = 5.0;
  double floor = 1e-8;
};

// delta_i ~ Normal(0, sigma_i^2 + tau), tau ~ HalfCauchy(scale). Sampled on
// log(tau) with the Jacobian included.
double log_tau_posterior(const std::vector<EffectObservation>& effects, double log_tau,
                         double cauchy_scale = 5.0);
Target tau_target(const std::vector<EffectObservation>& effects, double cauchy_scale = 5.0);

LearntTau learn_tau(const std::vector<EffectObservation>& effects, const SamplerConfig& config,
                    const MetapriorOptions& options = {});

// Raw posterior draws of tau (all chains).
std::vector<double> sample_tau(const std::vector<EffectObservation>& effects,
                               const SamplerConfig& config, double cauchy_scale = 5.0);

using EffectPolicy = std::function<bool(const ComparisonResult&)>;

// One (delta, sigma) per selected final-update comparison; every comparison
// when `policy` is empty. Degenerate comparisons are skipped.
std::vector<EffectObservation> collect_effects(
    const std::vector<std::vector<ComparisonResult>>& final_results_per_experiment,
    const EffectPolicy& policy = {});

// Indices of the first half (training) and second half (testing) of n items.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
Split split_halves(std::size_t n);

}  // namespace hbab

#endif  // HBAB_METAPRIOR_HPP
