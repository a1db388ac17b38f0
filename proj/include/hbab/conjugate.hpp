#ifndef HBAB_CONJUGATE_HPP
#define HBAB_CONJUGATE_HPP

#include <stdexcept>

#include <Eigen/Dense>

#include "hbab/sampler.hpp"

// Closed-form analysis of the normal hierarchical model with identity design:
//   ybar_f ~ Normal(beta_f, s_f^2),  beta_f | mu ~ Normal(mu, sigma_beta^2),
//   mu ~ Normal(0, sigma_mu^2),
// all on the logit scale.
namespace hbab::conjugate {

class ConjugateError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Instance {
  Eigen::VectorXd y_bar;
  Eigen::VectorXd s_sq;
  double sigma_beta_sq = 1.0;
  double sigma_mu_sq = 1.0;

  Eigen::Index size() const { return y_bar.size(); }
  void validate() const;
};

struct Posterior {
  Eigen::VectorXd beta_hat;
  Eigen::VectorXd sigma_hat_sq;
  double mu_tilde = 0.0;
  double sigma_tilde_sq = 0.0;
};

Posterior posterior(const Instance& instance);

// Pooling weights w_j = (sigma_beta^2 + s_j^2)^-1 / (sigma_mu^-2 + sum_k (sigma_beta^2 + s_k^2)^-1).
Eigen::VectorXd pooling_weights(const Instance& instance);

// Expected posterior mean when ybar is drawn around `true_beta`. Only the
// variances of `instance` are used.
Eigen::VectorXd estimator_mean(const Eigen::VectorXd& true_beta, const Instance& instance);

Eigen::VectorXd variance_upper_bound(const Instance& instance);

// Exact sampling variance of beta_hat_f; beta_hat is linear in ybar.
Eigen::VectorXd estimator_variance(const Instance& instance);

struct ShrinkageCoefficients {
  double c1 = 0.0;
  double c2 = 0.0;
};

ShrinkageCoefficients shrinkage_coefficients(double h, double c);

// Whether cell f of the instance meets the first sufficient condition with
// h = s_f^2 / sigma_beta^2 and sigma_mu^2 / sigma_beta^2 <= c.
bool satisfies_condition_one(const Instance& instance, Eigen::Index f, double c);

// Posterior of every beta_f obtained by integrating p(beta_f | mu, D) against
// p(mu | D) on a grid. p(mu | D) is evaluated pointwise from the prior and the
// marginal likelihood, never from the conjugate update, so this is an
// independent route to the same moments.
struct QuadratureOptions {
  int points = 10001;
  double half_width_sd = 8.0;
};
Posterior quadrature_posterior(const Instance& instance, QuadratureOptions options = {});

// Normal-normal model as a sampler target over (beta_1..beta_N, mu).
Target as_target(const Instance& instance);

}  // namespace hbab::conjugate

#endif  // HBAB_CONJUGATE_HPP
