#ifndef HBAB_ESTIMATE_HPP
#define HBAB_ESTIMATE_HPP

#include <cstdint>
#include <vector>

#include "hbab/design.hpp"
#include "hbab/glm.hpp"
#include "hbab/parallel.hpp"
#include "hbab/sampler.hpp"

namespace hbab {

struct CellEstimate {
  double mean = 0.0;
  double variance = 0.0;
  // Posterior draws of the rate; empty for maximum-likelihood estimates.
  std::vector<double> draws;
  // False when the cell has no assignments and no MLE exists.
  bool defined = true;

  bool has_draws() const { return !draws.empty(); }
};

CellEstimate mle_estimate(std::int64_t assignments, std::int64_t responses);
std::vector<CellEstimate> mle_estimates(const CountData& data);

struct HierarchicalFit {
  Hyperparams hyper;
  Parameterization parameterization = Parameterization::noncentered;
  SamplerConfig sampler;
};

// Runs NUTS on the hierarchical logistic model and reports draws of
// (beta..., mu, sigma, epsilon).
PosteriorSamples fit_hierarchical(const DesignMatrix& X, const CountData& data,
                                  const HierarchicalFit& fit);

// Pushes every posterior draw through sigmoid(X beta + epsilon).
std::vector<CellEstimate> hb_estimate(const PosteriorSamples& samples, const DesignMatrix& X,
                                      Execution exec = Execution::parallel);

// Context weights w_c proportional to traffic t_c.
std::vector<double> marginal_weights(const std::vector<double>& traffic);

// Traffic per context combination, summed over content combinations.
std::vector<double> context_traffic(const ExperimentSpec& spec, const CountData& data);

// One estimate per content combination: sum_c w_c * estimate(m, c). Draw-wise
// when every contributing cell has draws, otherwise mean-wise with variance
// sum_c w_c^2 v_c.
std::vector<CellEstimate> marginalize(const std::vector<CellEstimate>& cells,
                                      const ExperimentSpec& spec,
                                      const std::vector<double>& traffic);

}  // namespace hbab

#endif  // HBAB_ESTIMATE_HPP
