#include "hbab/metaprior.hpp"

#include <cmath>
#include <numbers>

namespace hbab {

namespace {

void validate_effects(const std::vector<EffectObservation>& effects) {
  if (effects.size() < 2) throw MetapriorError("need at least 2 effects to learn tau");
  for (std::size_t i = 0; i < effects.size(); ++i) {
    if (!(effects[i].noise_sd > 0.0) || !std::isfinite(effects[i].noise_sd))
      throw MetapriorError("effect " + std::to_string(i) + " has non-positive noise sd");
    if (!std::isfinite(effects[i].delta))
      throw MetapriorError("effect " + std::to_string(i) + " is not finite");
  }
}

}  // namespace

double log_tau_posterior(const std::vector<EffectObservation>& effects, double log_tau,
                         double cauchy_scale) {
  const double tau = std::exp(log_tau);
  double lp = std::log(2.0 / (std::numbers::pi * cauchy_scale)) -
              std::log1p((tau / cauchy_scale) * (tau / cauchy_scale)) + log_tau;
  for (const auto& e : effects) {
    const double v = e.noise_sd * e.noise_sd + tau;
    lp += -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * e.delta * e.delta / v;
  }
  return lp;
}

Target tau_target(const std::vector<EffectObservation>& effects, double cauchy_scale) {
  validate_effects(effects);
  Target t;
  t.dimension = 1;
  t.labels = {"tau"};
  t.log_density_gradient = [effects, cauchy_scale](const Eigen::VectorXd& q,
                                                   Eigen::VectorXd& grad) {
    const double log_tau = q[0];
    const double tau = std::exp(log_tau);
    const double r = tau / cauchy_scale;
    // d/dlog_tau of the prior part, then chain rule through tau for the likelihood.
    double g = 1.0 - 2.0 * r * r / (1.0 + r * r);
    for (const auto& e : effects) {
      const double v = e.noise_sd * e.noise_sd + tau;
      g += tau * (-0.5 / v + 0.5 * e.delta * e.delta / (v * v));
    }
    grad.resize(1);
    grad[0] = g;
    return log_tau_posterior(effects, log_tau, cauchy_scale);
  };
  t.transform = [](const Eigen::VectorXd& q) {
    Eigen::VectorXd out(1);
    out[0] = std::exp(q[0]);
    return out;
  };
  return t;
}

std::vector<double> sample_tau(const std::vector<EffectObservation>& effects,
                               const SamplerConfig& config, double cauchy_scale) {
  const PosteriorSamples s = sample(tau_target(effects, cauchy_scale), config);
  const Eigen::VectorXd col = s.column(0);
  return {col.data(), col.data() + col.size()};
}

LearntTau learn_tau(const std::vector<EffectObservation>& effects, const SamplerConfig& config,
                    const MetapriorOptions& options) {
  const PosteriorSamples s = sample(tau_target(effects, options.cauchy_scale), config);
  const Eigen::VectorXd draws = s.column(0);
  const Summary sum = summarize(draws);
  LearntTau out;
  out.corpus_size = effects.size();
  out.posterior_mean = sum.mean;
  out.q025 = sum.q025;
  out.q50 = sum.q50;
  out.q975 = sum.q975;
  out.q95 = quantile(std::vector<double>(draws.data(), draws.data() + draws.size()), 0.95);
  out.point_value = sum.mean;
  if (!(out.point_value > options.floor)) {
    out.point_value = options.floor;
    out.floored = true;
    out.warnings.push_back("learnt tau is at or below the floor; using floor value");
  }
  if (s.diagnostics.divergence_warning)
    out.warnings.push_back("more than 10% of transitions diverged while learning tau");
  if (s.diagnostics.split_r_hat[0] > 1.05)
    out.warnings.push_back("split R-hat above 1.05 for tau");
  return out;
}

std::vector<EffectObservation> collect_effects(
    const std::vector<std::vector<ComparisonResult>>& final_results_per_experiment,
    const EffectPolicy& policy) {
  std::vector<EffectObservation> out;
  for (const auto& experiment : final_results_per_experiment)
    for (const auto& r : experiment) {
      if (r.degenerate || !(r.diff_var > 0.0)) continue;
      if (policy && !policy(r)) continue;
      out.push_back({r.diff_mean, std::sqrt(r.diff_var)});
    }
  return out;
}

Split split_halves(std::size_t n) {
  Split s;
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < n; ++i) (i < half ? s.train : s.test).push_back(i);
  return s;
}

}  // namespace hbab
