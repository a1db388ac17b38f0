#ifndef HBAB_GLM_HPP
#define HBAB_GLM_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbab/design.hpp"

namespace hbab {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Natural-scale parameters of the hierarchical logistic model. sigma is kept
// on the log scale so every coordinate is unconstrained.
struct ModelParams {
  Eigen::VectorXd beta;
  double mu = 0.0;
  double log_sigma = 0.0;
  double epsilon = 0.0;

  double sigma() const;
};

struct Hyperparams {
  double mu_prior_mean = 0.0;
  double mu_prior_sd = 10.0;
  double sigma_cauchy_scale = 5.0;

  void validate() const;
};

struct CountData {
  std::vector<std::int64_t> assignments;
  std::vector<std::int64_t> responses;

  std::size_t size() const { return assignments.size(); }
  void validate(std::size_t cells) const;
  CountData& operator+=(const CountData& other);
};

double sigmoid(double x);
double logit(double p);
// log(sigmoid(x)) without overflow for large |x|.
double log_sigmoid(double x);
double log_binomial_coefficient(std::int64_t n, std::int64_t k);

// Half-Cauchy(scale) density for sigma, expressed on log_sigma including the
// Jacobian term.
double log_sigma_prior(double log_sigma, double scale);

Eigen::VectorXd predict_rates(const ModelParams& params, const DesignMatrix& X);

double log_posterior(const ModelParams& params, const CountData& data, const DesignMatrix& X,
                     const Hyperparams& hyper);

// Gradient over the flat layout (beta..., mu, log_sigma, epsilon).
Eigen::VectorXd grad_log_posterior(const ModelParams& params, const CountData& data,
                                   const DesignMatrix& X, const Hyperparams& hyper);

Eigen::VectorXd flatten(const ModelParams& params);
ModelParams unflatten(const Eigen::VectorXd& flat);

enum class Parameterization { centered, noncentered };

// Target density for the sampler. With the non-centered parameterization the
// sampled coordinates are (z, mu, log_sigma, epsilon) with beta = mu + sigma * z.
class HierarchicalModel {
 public:
  HierarchicalModel(const DesignMatrix& X, const CountData& data, Hyperparams hyper = {},
                    Parameterization param = Parameterization::noncentered);

  int dimension() const { return static_cast<int>(cols_) + 3; }
  Parameterization parameterization() const { return param_; }

  double log_density(const Eigen::VectorXd& theta) const;
  double log_density_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;

  ModelParams to_params(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd from_params(const ModelParams& params) const;

  // Labels of the natural parameters: beta[j]..., mu, sigma, epsilon.
  std::vector<std::string> natural_labels() const;
  // Natural parameter vector (beta..., mu, sigma, epsilon) for one draw.
  Eigen::VectorXd natural(const Eigen::VectorXd& theta) const;

 private:
  // Log-likelihood and dL/d(eta) on observed cells.
  double likelihood(const Eigen::VectorXd& beta, double epsilon, Eigen::VectorXd* d_eta) const;

  Eigen::MatrixXd X_;  // observed rows only
  Eigen::VectorXd a_;
  Eigen::VectorXd r_;
  double log_binom_const_ = 0.0;
  Hyperparams hyper_;
  Parameterization param_;
  Eigen::Index cols_;
};

}  // namespace hbab

#endif  // HBAB_GLM_HPP
