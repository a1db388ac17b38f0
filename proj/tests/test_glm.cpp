#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hbab/glm.hpp"

using namespace hbab;

namespace {

ExperimentSpec spec_23() {
  return ExperimentSpec({{"a", {"x", "y"}}}, {{"b", {"p", "q", "r"}}});
}

ModelParams random_params(std::mt19937_64& rng, Eigen::Index cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ModelParams p;
  p.beta = Eigen::VectorXd::NullaryExpr(cols, [&] { return u(rng); });
  p.mu = u(rng);
  p.log_sigma = u(rng);
  p.epsilon = u(rng);
  return p;
}

CountData random_counts(std::mt19937_64& rng, std::size_t cells) {
  CountData d;
  for (std::size_t k = 0; k < cells; ++k) {
    const auto a = std::uniform_int_distribution<std::int64_t>(0, 60)(rng);
    d.assignments.push_back(a);
    d.responses.push_back(std::uniform_int_distribution<std::int64_t>(0, a)(rng));
  }
  return d;
}

// Straight-line evaluator, written independently of glm.cpp.
double reference_log_posterior(const ModelParams& p, const CountData& d, const Eigen::MatrixXd& X,
                               const Hyperparams& h) {
  const double pi = std::numbers::pi;
  const double sigma = std::exp(p.log_sigma);
  double lp = 0.0;
  for (Eigen::Index j = 0; j < p.beta.size(); ++j) {
    const double z = (p.beta[j] - p.mu) / sigma;
    lp += -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2 * pi);
  }
  const double zm = (p.mu - h.mu_prior_mean) / h.mu_prior_sd;
  lp += -0.5 * zm * zm - std::log(h.mu_prior_sd) - 0.5 * std::log(2 * pi);
  const double b = h.sigma_cauchy_scale;
  lp += std::log(2.0 / (pi * b * (1 + (sigma / b) * (sigma / b)))) + p.log_sigma;
  lp += -0.5 * p.epsilon * p.epsilon - 0.5 * std::log(2 * pi);
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const double a = static_cast<double>(d.assignments[static_cast<std::size_t>(k)]);
    const double r = static_cast<double>(d.responses[static_cast<std::size_t>(k)]);
    const double eta = X.row(k).dot(p.beta) + p.epsilon;
    const double q = 1.0 / (1.0 + std::exp(-eta));
    lp += std::lgamma(a + 1) - std::lgamma(r + 1) - std::lgamma(a - r + 1) + r * std::log(q) +
          (a - r) * std::log(1 - q);
  }
  return lp;
}

double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return worst;
}

}  // namespace

TEST_CASE("predict_rates") {
  const auto X = build_design_matrix(spec_23(), 2);
  ModelParams p;
  p.beta = Eigen::VectorXd::Zero(X.cols());
  CHECK(predict_rates(p, X).isApproxToConstant(0.5));

  p.beta[0] = logit(0.7);
  for (double r : predict_rates(p, X)) CHECK(r == doctest::Approx(0.7).epsilon(1e-12));

  std::mt19937_64 rng(7);
  p = random_params(rng, X.cols());
  const auto rates = predict_rates(p, X);
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    double eta = p.epsilon;
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      if (X.entries(k, j) == 1.0) eta += p.beta[j];
    CHECK(rates[k] == doctest::Approx(1.0 / (1.0 + std::exp(-eta))).epsilon(1e-12));
  }

  p.beta.resize(3);
  CHECK_THROWS_AS(predict_rates(p, X), ModelError);
}

TEST_CASE("log_posterior matches a straight-line evaluator") {
  const auto X = build_design_matrix(spec_23(), 2);
  const Hyperparams h;
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = random_params(rng, X.cols());
    const auto d = random_counts(rng, 6);
    CHECK(log_posterior(p, d, X, h) ==
          doctest::Approx(reference_log_posterior(p, d, X.entries, h)).epsilon(1e-12));
  }
}

TEST_CASE("empty data gives the prior") {
  const auto X = build_design_matrix(spec_23(), 2);
  std::mt19937_64 rng(3);
  const auto p = random_params(rng, X.cols());
  CountData empty;
  empty.assignments.assign(6, 0);
  empty.responses.assign(6, 0);
  ModelParams flat = p;
  const double prior = reference_log_posterior(p, empty, X.entries, Hyperparams{});
  CHECK(log_posterior(flat, empty, X, Hyperparams{}) == doctest::Approx(prior).epsilon(1e-12));

  // Likelihood gradient vanishes; the epsilon coordinate is then just -epsilon.
  const auto g = grad_log_posterior(p, empty, X, Hyperparams{});
  CHECK(g[g.size() - 1] == doctest::Approx(-p.epsilon));
}

TEST_CASE("single-cell binomial term") {
  const ExperimentSpec spec({{"a", {"x", "y"}}}, {});
  const auto X = build_design_matrix(spec, 1);
  ModelParams p;
  p.beta = Eigen::VectorXd::Zero(X.cols());
  CountData with, without;
  with.assignments = {10, 0};
  with.responses = {5, 0};
  without.assignments = {0, 0};
  without.responses = {0, 0};
  const double diff = log_posterior(p, with, X, {}) - log_posterior(p, without, X, {});
  CHECK(diff == doctest::Approx(std::log(252.0) + 10 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("gradient matches central differences") {
  const auto X = build_design_matrix(spec_23(), 2);
  const Hyperparams h;
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const auto p = random_params(rng, X.cols());
    const auto d = random_counts(rng, 6);
    const Eigen::VectorXd x = flatten(p);
    const Eigen::VectorXd g = grad_log_posterior(p, d, X, h);
    Eigen::VectorXd fd(x.size());
    const double step = 1e-6;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::VectorXd hi = x, lo = x;
      hi[i] += step;
      lo[i] -= step;
      fd[i] = (log_posterior(unflatten(hi), d, X, h) - log_posterior(unflatten(lo), d, X, h)) /
              (2 * step);
    }
    CHECK(max_relative_error(g, fd) < 1e-5);
  }
}

TEST_CASE("symmetric data has zero mu gradient at the origin") {
  const auto X = build_design_matrix(spec_23(), 2);
  ModelParams p;
  p.beta = Eigen::VectorXd::Zero(X.cols());
  CountData d;
  d.assignments.assign(6, 20);
  d.responses.assign(6, 10);
  const auto g = grad_log_posterior(p, d, X, {});
  CHECK(g[X.cols()] == doctest::Approx(0.0));
}

TEST_CASE("model target agrees with log_posterior in both parameterizations") {
  const auto X = build_design_matrix(spec_23(), 2);
  std::mt19937_64 rng(9);
  const auto d = random_counts(rng, 6);
  for (auto param : {Parameterization::centered, Parameterization::noncentered}) {
    const HierarchicalModel model(X, d, {}, param);
    for (int rep = 0; rep < 10; ++rep) {
      Eigen::VectorXd theta =
          Eigen::VectorXd::NullaryExpr(model.dimension(), [&] {
            return std::uniform_real_distribution<double>(-1, 1)(rng);
          });
      Eigen::VectorXd grad;
      const double lp = model.log_density_gradient(theta, grad);
      CHECK(lp == doctest::Approx(model.log_density(theta)).epsilon(1e-12));

      Eigen::VectorXd fd(theta.size());
      for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd hi = theta, lo = theta;
        hi[i] += 1e-6;
        lo[i] -= 1e-6;
        fd[i] = (model.log_density(hi) - model.log_density(lo)) / 2e-6;
      }
      CHECK(max_relative_error(grad, fd) < 1e-5);

      const ModelParams p = model.to_params(theta);
      CHECK((model.from_params(p) - theta).norm() < 1e-12);
      if (param == Parameterization::centered)
        CHECK(lp == doctest::Approx(log_posterior(p, d, X, {})).epsilon(1e-12));
    }
  }
}

TEST_CASE("cell permutation invariance") {
  const auto X = build_design_matrix(spec_23(), 2);
  std::mt19937_64 rng(13);
  const auto p = random_params(rng, X.cols());
  const auto d = random_counts(rng, 6);
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};
  DesignMatrix Xp = X;
  CountData dp = d;
  for (std::size_t k = 0; k < 6; ++k) {
    Xp.entries.row(static_cast<Eigen::Index>(k)) = X.entries.row(perm[k]);
    dp.assignments[k] = d.assignments[static_cast<std::size_t>(perm[k])];
    dp.responses[k] = d.responses[static_cast<std::size_t>(perm[k])];
  }
  CHECK(log_posterior(p, dp, Xp, {}) == doctest::Approx(log_posterior(p, d, X, {})).epsilon(1e-12));
}

TEST_CASE("half-Cauchy prior on log sigma integrates to one") {
  double total = 0.0;
  const double lo = -40.0, hi = 40.0;
  const int n = 400000;
  const double h = (hi - lo) / n;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    total += w * std::exp(log_sigma_prior(lo + i * h, 5.0));
  }
  CHECK(std::abs(total * h - 1.0) < 1e-3);
}

TEST_CASE("count validation") {
  CountData d;
  d.assignments = {3, 2};
  d.responses = {4, 0};
  CHECK_THROWS_AS(d.validate(2), ModelError);
  d.responses = {1, 0};
  CHECK_THROWS_AS(d.validate(3), ModelError);
  CHECK_NOTHROW(d.validate(2));
  CHECK_THROWS_AS((Hyperparams{0.0, -1.0, 5.0}.validate()), ModelError);
}
