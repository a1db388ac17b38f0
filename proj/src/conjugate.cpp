#include "hbab/conjugate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hbab::conjugate {

void Instance::validate() const {
  if (y_bar.size() < 1) throw ConjugateError("instance needs at least one cell");
  if (s_sq.size() != y_bar.size()) throw ConjugateError("y_bar and s_sq differ in length");
  if (!(s_sq.array() > 0.0).all()) throw ConjugateError("data variances must be positive");
  if (!(sigma_beta_sq > 0.0) || !(sigma_mu_sq > 0.0))
    throw ConjugateError("prior variances must be positive");
}

Eigen::VectorXd pooling_weights(const Instance& instance) {
  instance.validate();
  const Eigen::ArrayXd inv = 1.0 / (instance.sigma_beta_sq + instance.s_sq.array());
  return (inv / (1.0 / instance.sigma_mu_sq + inv.sum())).matrix();
}

namespace {

// beta_hat_f = own_f * ybar_f + pool_f * mu_tilde
Eigen::ArrayXd own_factor(const Instance& in) {
  return 1.0 / (1.0 + in.s_sq.array() / in.sigma_beta_sq);
}
Eigen::ArrayXd pool_factor(const Instance& in) {
  return 1.0 / (1.0 + in.sigma_beta_sq / in.s_sq.array());
}

double pooled_variance(const Instance& in) {
  return 1.0 / (1.0 / in.sigma_mu_sq + (1.0 / (in.s_sq.array() + in.sigma_beta_sq)).sum());
}

}  // namespace

Posterior posterior(const Instance& instance) {
  const Eigen::VectorXd w = pooling_weights(instance);
  Posterior post;
  post.mu_tilde = w.dot(instance.y_bar);
  post.sigma_tilde_sq = pooled_variance(instance);
  const Eigen::ArrayXd pool = pool_factor(instance);
  post.beta_hat = (own_factor(instance) * instance.y_bar.array() + pool * post.mu_tilde).matrix();
  post.sigma_hat_sq =
      (1.0 / (1.0 / instance.sigma_beta_sq + 1.0 / instance.s_sq.array()) +
       pool.square() * post.sigma_tilde_sq)
          .matrix();
  return post;
}

Eigen::VectorXd estimator_mean(const Eigen::VectorXd& true_beta, const Instance& instance) {
  if (true_beta.size() != instance.size()) throw ConjugateError("true_beta has wrong length");
  Instance shifted = instance;
  shifted.y_bar = true_beta;
  return posterior(shifted).beta_hat;
}

Eigen::VectorXd variance_upper_bound(const Instance& instance) {
  const Eigen::VectorXd w = pooling_weights(instance);
  const Eigen::ArrayXd s_sq = instance.s_sq.array();
  const Eigen::ArrayXd pool_sq = pool_factor(instance).square();
  const double pooled_noise = (w.array().square() * s_sq).sum();
  return (s_sq * own_factor(instance).square() + 2.0 * instance.sigma_beta_sq * pool_sq +
          pool_sq * pooled_noise)
      .matrix();
}

Eigen::VectorXd estimator_variance(const Instance& instance) {
  const Eigen::VectorXd w = pooling_weights(instance);
  const Eigen::ArrayXd own = own_factor(instance);
  const Eigen::ArrayXd pool = pool_factor(instance);
  const Eigen::ArrayXd s_sq = instance.s_sq.array();
  const double pooled_noise = (w.array().square() * s_sq).sum();
  Eigen::VectorXd out(instance.size());
  for (Eigen::Index f = 0; f < instance.size(); ++f) {
    const double self = own[f] + pool[f] * w[f];
    const double others = pooled_noise - w[f] * w[f] * s_sq[f];
    out[f] = self * self * s_sq[f] + pool[f] * pool[f] * others;
  }
  return out;
}

ShrinkageCoefficients shrinkage_coefficients(double h, double c) {
  if (!(h > 0.0)) throw ConjugateError("h must be positive");
  if (!(c > 0.0)) throw ConjugateError("c must be positive");
  const double a = 1.0 + h;
  const double b = 1.0 + 1.0 / h;
  const double common = 1.0 / (a * a) + 2.0 / (h * b * b);
  return {common + c * c / (a * a * b * b) + 1.0 / (h * h * b * b), common + 1.0 / (b * b)};
}

bool satisfies_condition_one(const Instance& instance, Eigen::Index f, double c) {
  instance.validate();
  const double h = instance.s_sq[f] / instance.sigma_beta_sq;
  if (instance.sigma_mu_sq / instance.sigma_beta_sq > c) return false;
  for (Eigen::Index j = 0; j < instance.size(); ++j)
    if (j != f && instance.s_sq[j] / instance.sigma_beta_sq > 1.0 / h) return false;
  return true;
}

namespace {

// Unnormalized log p(mu | D): prior times the marginal likelihood of each
// ybar_j ~ Normal(mu, sigma_beta^2 + s_j^2).
double log_mu_weight(const Instance& in, double mu) {
  double lw = -0.5 * mu * mu / in.sigma_mu_sq;
  for (Eigen::Index j = 0; j < in.size(); ++j) {
    const double v = in.sigma_beta_sq + in.s_sq[j];
    const double d = in.y_bar[j] - mu;
    lw += -0.5 * d * d / v;
  }
  return lw;
}

struct GridMoments {
  double mean;
  double sd;
};

// Trapezoid-rule moments of p(mu | D) on [lo, hi].
GridMoments mu_moments(const Instance& in, double lo, double hi, int points,
                       Eigen::VectorXd* grid, Eigen::VectorXd* weights) {
  Eigen::VectorXd mu = Eigen::VectorXd::LinSpaced(points, lo, hi);
  Eigen::VectorXd lw(points);
  for (int i = 0; i < points; ++i) lw[i] = log_mu_weight(in, mu[i]);
  Eigen::VectorXd w = (lw.array() - lw.maxCoeff()).exp().matrix();
  w[0] *= 0.5;
  w[points - 1] *= 0.5;
  w /= w.sum();
  const double mean = w.dot(mu);
  const double var = w.dot((mu.array() - mean).square().matrix());
  if (grid) *grid = std::move(mu);
  if (weights) *weights = std::move(w);
  return {mean, std::sqrt(std::max(var, 0.0))};
}

}  // namespace

Posterior quadrature_posterior(const Instance& instance, QuadratureOptions options) {
  instance.validate();
  if (options.points < 3) throw ConjugateError("quadrature needs at least 3 points");

  // Locate p(mu | D) on a wide grid covering the prior centre and all data,
  // then re-centre a few times on the current moment estimates.
  const double spread = std::sqrt(instance.sigma_beta_sq + instance.s_sq.maxCoeff());
  double lo = std::min(0.0, instance.y_bar.minCoeff()) - 10.0 * spread;
  double hi = std::max(0.0, instance.y_bar.maxCoeff()) + 10.0 * spread;
  lo = std::max(lo, -10.0 * std::sqrt(instance.sigma_mu_sq) + std::min(0.0, instance.y_bar.minCoeff()));
  hi = std::min(hi, 10.0 * std::sqrt(instance.sigma_mu_sq) + std::max(0.0, instance.y_bar.maxCoeff()));
  GridMoments m = mu_moments(instance, lo, hi, 20001, nullptr, nullptr);
  for (int refine = 0; refine < 4; ++refine) {
    const double spacing = (hi - lo) / 20000.0;
    const double width = options.half_width_sd * std::max(m.sd, spacing);
    lo = m.mean - width;
    hi = m.mean + width;
    m = mu_moments(instance, lo, hi, 20001, nullptr, nullptr);
  }

  Eigen::VectorXd mu, w;
  m = mu_moments(instance, m.mean - options.half_width_sd * m.sd,
                 m.mean + options.half_width_sd * m.sd, options.points, &mu, &w);

  Posterior post;
  post.mu_tilde = m.mean;
  post.sigma_tilde_sq = m.sd * m.sd;
  const Eigen::Index n = instance.size();
  post.beta_hat.resize(n);
  post.sigma_hat_sq.resize(n);
  for (Eigen::Index f = 0; f < n; ++f) {
    // beta_f | mu, D is a single normal-normal update.
    const double prec = 1.0 / instance.s_sq[f] + 1.0 / instance.sigma_beta_sq;
    const double cond_var = 1.0 / prec;
    const Eigen::ArrayXd cond_mean =
        (instance.y_bar[f] / instance.s_sq[f] + mu.array() / instance.sigma_beta_sq) / prec;
    const double mean = (w.array() * cond_mean).sum();
    const double spread_var = (w.array() * (cond_mean - mean).square()).sum();
    post.beta_hat[f] = mean;
    post.sigma_hat_sq[f] = cond_var + spread_var;
  }
  return post;
}

Target as_target(const Instance& instance) {
  instance.validate();
  Target t;
  const Eigen::Index n = instance.size();
  t.dimension = static_cast<int>(n) + 1;
  for (Eigen::Index f = 0; f < n; ++f) t.labels.push_back("beta[" + std::to_string(f) + "]");
  t.labels.push_back("mu");
  t.log_density_gradient = [instance, n](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    const auto beta = theta.head(n).array();
    const double mu = theta[n];
    const Eigen::ArrayXd data_resid = (instance.y_bar.array() - beta) / instance.s_sq.array();
    const Eigen::ArrayXd prior_resid = (beta - mu) / instance.sigma_beta_sq;
    grad.resize(n + 1);
    grad.head(n) = (data_resid - prior_resid).matrix();
    grad[n] = prior_resid.sum() - mu / instance.sigma_mu_sq;
    return -0.5 * (data_resid.square() * instance.s_sq.array()).sum() -
           0.5 * (beta - mu).square().sum() / instance.sigma_beta_sq -
           0.5 * mu * mu / instance.sigma_mu_sq;
  };
  return t;
}

}  // namespace hbab::conjugate
