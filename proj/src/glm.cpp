#include "hbab/glm.hpp"

#include <cmath>
#include <numbers>

namespace hbab {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double log_normal(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kHalfLog2Pi;
}

// d/d(log_sigma) of log_sigma_prior.
double d_log_sigma_prior(double log_sigma, double scale) {
  const double s2 = std::exp(2.0 * log_sigma);
  return 1.0 - 2.0 * s2 / (scale * scale + s2);
}

void check_dims(const ModelParams& params, const DesignMatrix& X) {
  if (params.beta.size() != X.cols())
    throw ModelError("beta has " + std::to_string(params.beta.size()) + " entries but X has " +
                     std::to_string(X.cols()) + " columns");
}

}  // namespace

double ModelParams::sigma() const { return std::exp(log_sigma); }

void Hyperparams::validate() const {
  if (!(mu_prior_sd > 0.0)) throw ModelError("mu prior sd must be positive");
  if (!(sigma_cauchy_scale > 0.0)) throw ModelError("half-Cauchy scale must be positive");
}

void CountData::validate(std::size_t cells) const {
  if (assignments.size() != cells || responses.size() != cells)
    throw ModelError("count vectors must have one entry per cell (" + std::to_string(cells) +
                     ")");
  for (std::size_t k = 0; k < cells; ++k) {
    if (assignments[k] < 0 || responses[k] < 0 || responses[k] > assignments[k])
      throw ModelError("cell " + std::to_string(k) + " violates 0 <= responses <= assignments");
  }
}

CountData& CountData::operator+=(const CountData& other) {
  if (assignments.empty()) {
    assignments.assign(other.size(), 0);
    responses.assign(other.size(), 0);
  }
  if (other.size() != size()) throw ModelError("cannot add count data of different sizes");
  for (std::size_t k = 0; k < size(); ++k) {
    assignments[k] += other.assignments[k];
    responses[k] += other.responses[k];
  }
  return *this;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double log_sigmoid(double x) {
  return x < 0.0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x));
}

double log_binomial_coefficient(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double log_sigma_prior(double log_sigma, double scale) {
  const double ratio = std::exp(log_sigma) / scale;
  return std::log(2.0 / (std::numbers::pi * scale)) - std::log1p(ratio * ratio) + log_sigma;
}

Eigen::VectorXd predict_rates(const ModelParams& params, const DesignMatrix& X) {
  check_dims(params, X);
  Eigen::VectorXd eta = X.entries * params.beta;
  return eta.unaryExpr([&](double e) { return sigmoid(e + params.epsilon); });
}

double log_posterior(const ModelParams& params, const CountData& data, const DesignMatrix& X,
                     const Hyperparams& hyper) {
  check_dims(params, X);
  data.validate(static_cast<std::size_t>(X.rows()));
  const double sigma = params.sigma();
  double lp = log_normal(params.epsilon, 0.0, 1.0) +
              log_normal(params.mu, hyper.mu_prior_mean, hyper.mu_prior_sd) +
              log_sigma_prior(params.log_sigma, hyper.sigma_cauchy_scale);
  for (Eigen::Index j = 0; j < params.beta.size(); ++j)
    lp += log_normal(params.beta[j], params.mu, sigma);

  const Eigen::VectorXd eta = X.entries * params.beta;
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const auto a = data.assignments[static_cast<std::size_t>(k)];
    const auto r = data.responses[static_cast<std::size_t>(k)];
    if (a == 0) continue;
    const double e = eta[k] + params.epsilon;
    lp += log_binomial_coefficient(a, r) + static_cast<double>(r) * log_sigmoid(e) +
          static_cast<double>(a - r) * log_sigmoid(-e);
  }
  return lp;
}

Eigen::VectorXd grad_log_posterior(const ModelParams& params, const CountData& data,
                                   const DesignMatrix& X, const Hyperparams& hyper) {
  check_dims(params, X);
  data.validate(static_cast<std::size_t>(X.rows()));
  const Eigen::Index K = params.beta.size();
  const double sigma = params.sigma();
  const double inv_var = 1.0 / (sigma * sigma);

  Eigen::VectorXd d_eta = Eigen::VectorXd::Zero(X.rows());
  const Eigen::VectorXd eta = X.entries * params.beta;
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const auto a = static_cast<double>(data.assignments[static_cast<std::size_t>(k)]);
    const auto r = static_cast<double>(data.responses[static_cast<std::size_t>(k)]);
    d_eta[k] = r - a * sigmoid(eta[k] + params.epsilon);
  }

  Eigen::VectorXd grad(K + 3);
  const Eigen::VectorXd centered = params.beta.array() - params.mu;
  grad.head(K) = X.entries.transpose() * d_eta - centered * inv_var;
  grad[K] = centered.sum() * inv_var -
            (params.mu - hyper.mu_prior_mean) / (hyper.mu_prior_sd * hyper.mu_prior_sd);
  grad[K + 1] = centered.squaredNorm() * inv_var - static_cast<double>(K) +
                d_log_sigma_prior(params.log_sigma, hyper.sigma_cauchy_scale);
  grad[K + 2] = d_eta.sum() - params.epsilon;
  return grad;
}

Eigen::VectorXd flatten(const ModelParams& params) {
  const Eigen::Index K = params.beta.size();
  Eigen::VectorXd flat(K + 3);
  flat.head(K) = params.beta;
  flat[K] = params.mu;
  flat[K + 1] = params.log_sigma;
  flat[K + 2] = params.epsilon;
  return flat;
}

ModelParams unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() < 3) throw ModelError("flat parameter vector too short");
  const Eigen::Index K = flat.size() - 3;
  return {flat.head(K), flat[K], flat[K + 1], flat[K + 2]};
}

HierarchicalModel::HierarchicalModel(const DesignMatrix& X, const CountData& data,
                                     Hyperparams hyper, Parameterization param)
    : hyper_(hyper), param_(param), cols_(X.cols()) {
  hyper_.validate();
  data.validate(static_cast<std::size_t>(X.rows()));
  std::vector<Eigen::Index> observed;
  for (std::size_t k = 0; k < data.size(); ++k)
    if (data.assignments[k] > 0) observed.push_back(static_cast<Eigen::Index>(k));
  const auto n = static_cast<Eigen::Index>(observed.size());
  X_.resize(n, cols_);
  a_.resize(n);
  r_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(observed[static_cast<std::size_t>(i)]);
    X_.row(i) = X.entries.row(observed[static_cast<std::size_t>(i)]);
    a_[i] = static_cast<double>(data.assignments[k]);
    r_[i] = static_cast<double>(data.responses[k]);
    log_binom_const_ += log_binomial_coefficient(data.assignments[k], data.responses[k]);
  }
}

double HierarchicalModel::likelihood(const Eigen::VectorXd& beta, double epsilon,
                                     Eigen::VectorXd* d_eta) const {
  const Eigen::VectorXd eta = X_ * beta;
  double ll = log_binom_const_;
  if (d_eta) d_eta->resize(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta[i] + epsilon;
    ll += r_[i] * log_sigmoid(e) + (a_[i] - r_[i]) * log_sigmoid(-e);
    if (d_eta) (*d_eta)[i] = r_[i] - a_[i] * sigmoid(e);
  }
  return ll;
}

ModelParams HierarchicalModel::to_params(const Eigen::VectorXd& theta) const {
  ModelParams p = unflatten(theta);
  if (param_ == Parameterization::noncentered)
    p.beta = (p.mu + p.sigma() * p.beta.array()).matrix();
  return p;
}

Eigen::VectorXd HierarchicalModel::from_params(const ModelParams& params) const {
  Eigen::VectorXd theta = flatten(params);
  if (param_ == Parameterization::noncentered)
    theta.head(cols_) = ((params.beta.array() - params.mu) / params.sigma()).matrix();
  return theta;
}

double HierarchicalModel::log_density(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd unused;
  return log_density_gradient(theta, unused);
}

double HierarchicalModel::log_density_gradient(const Eigen::VectorXd& theta,
                                               Eigen::VectorXd& grad) const {
  if (theta.size() != dimension()) throw ModelError("parameter vector has wrong dimension");
  const Eigen::Index K = cols_;
  const double mu = theta[K];
  const double log_sigma = theta[K + 1];
  const double epsilon = theta[K + 2];
  const double sigma = std::exp(log_sigma);
  const double mu_var = hyper_.mu_prior_sd * hyper_.mu_prior_sd;

  double lp = log_normal(epsilon, 0.0, 1.0) +
              log_normal(mu, hyper_.mu_prior_mean, hyper_.mu_prior_sd) +
              log_sigma_prior(log_sigma, hyper_.sigma_cauchy_scale);

  Eigen::VectorXd d_eta;
  grad.resize(theta.size());
  if (param_ == Parameterization::noncentered) {
    const auto z = theta.head(K);
    const Eigen::VectorXd beta = (mu + sigma * z.array()).matrix();
    lp += -0.5 * z.squaredNorm() - static_cast<double>(K) * kHalfLog2Pi;
    lp += likelihood(beta, epsilon, &d_eta);
    const Eigen::VectorXd g_beta = X_.transpose() * d_eta;
    grad.head(K) = sigma * g_beta - z;
    grad[K] = g_beta.sum() - (mu - hyper_.mu_prior_mean) / mu_var;
    grad[K + 1] = sigma * z.dot(g_beta) + d_log_sigma_prior(log_sigma, hyper_.sigma_cauchy_scale);
  } else {
    const auto beta = theta.head(K);
    const Eigen::VectorXd centered = beta.array() - mu;
    const double inv_var = 1.0 / (sigma * sigma);
    lp += -0.5 * centered.squaredNorm() * inv_var -
          static_cast<double>(K) * (log_sigma + kHalfLog2Pi);
    lp += likelihood(beta, epsilon, &d_eta);
    grad.head(K) = X_.transpose() * d_eta - centered * inv_var;
    grad[K] = centered.sum() * inv_var - (mu - hyper_.mu_prior_mean) / mu_var;
    grad[K + 1] = centered.squaredNorm() * inv_var - static_cast<double>(K) +
                  d_log_sigma_prior(log_sigma, hyper_.sigma_cauchy_scale);
  }
  grad[K + 2] = d_eta.sum() - epsilon;
  return lp;
}

std::vector<std::string> HierarchicalModel::natural_labels() const {
  std::vector<std::string> labels;
  for (Eigen::Index j = 0; j < cols_; ++j) labels.push_back("beta[" + std::to_string(j) + "]");
  labels.insert(labels.end(), {"mu", "sigma", "epsilon"});
  return labels;
}

Eigen::VectorXd HierarchicalModel::natural(const Eigen::VectorXd& theta) const {
  const ModelParams p = to_params(theta);
  Eigen::VectorXd out(cols_ + 3);
  out.head(cols_) = p.beta;
  out[cols_] = p.mu;
  out[cols_ + 1] = p.sigma();
  out[cols_ + 2] = p.epsilon;
  return out;
}

}  // namespace hbab
