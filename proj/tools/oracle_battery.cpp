#include "oracle_battery.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hbab/random.hpp"
#include "hbab/sampler.hpp"

namespace hbab::oracle {

using conjugate::Instance;

namespace {

Instance random_instance(Rng& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.05, 2.0);
  std::normal_distribution<double> z;
  Instance in;
  in.y_bar = Eigen::VectorXd::NullaryExpr(n, [&] { return z(rng); });
  in.s_sq = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
  in.sigma_beta_sq = u(rng);
  in.sigma_mu_sq = u(rng);
  return in;
}

Eigen::Index cells_for(int i, int max_cells) { return 1 + i % max_cells; }

struct Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

// beta_hat over replications of ybar ~ Normal(true_beta, s^2).
Moments replicate(const ClosedForm& closed_form, const Instance& in,
                  const Eigen::VectorXd& true_beta, int reps, Rng& rng) {
  std::normal_distribution<double> z;
  const Eigen::Index n = in.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), sq = Eigen::VectorXd::Zero(n);
  Instance draw = in;
  for (int r = 0; r < reps; ++r) {
    for (Eigen::Index f = 0; f < n; ++f) draw.y_bar[f] = true_beta[f] + std::sqrt(in.s_sq[f]) * z(rng);
    const Eigen::VectorXd b = closed_form(draw).beta_hat;
    sum += b;
    sq += b.cwiseProduct(b);
  }
  Moments m;
  m.mean = sum / reps;
  m.var = (sq / reps - m.mean.cwiseProduct(m.mean)) * (reps / (reps - 1.0));
  return m;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

conjugate::Posterior mutated_posterior(const Instance& instance) {
  auto post = conjugate::posterior(instance);
  post.beta_hat = (instance.y_bar.array() / (1.0 + instance.s_sq.array() / instance.sigma_beta_sq)).matrix();
  return post;
}

CheckResult check_quadrature(const BatteryOptions& o) {
  Rng rng = make_stream(o.seed, {1});
  double worst = 0.0;
  for (int i = 0; i < o.instances; ++i) {
    const auto in = random_instance(rng, cells_for(i, o.max_cells));
    const auto closed = o.closed_form(in);
    const auto quad = conjugate::quadrature_posterior(in);
    worst = std::max({worst, (closed.beta_hat - quad.beta_hat).cwiseAbs().maxCoeff(),
                      (closed.sigma_hat_sq - quad.sigma_hat_sq).cwiseAbs().maxCoeff()});
  }
  CheckResult r{"closed_form_vs_quadrature", "max abs error < 1e-6", worst, 1e-6, worst < 1e-6, ""};
  r.detail = std::to_string(o.instances) + " instances, up to " + std::to_string(o.max_cells) + " cells";
  return r;
}

CheckResult check_estimator_mean(const BatteryOptions& o) {
  Rng rng = make_stream(o.seed, {2});
  const auto in = random_instance(rng, 4);
  Eigen::VectorXd beta(4);
  beta << 0.5, -0.3, 1.0, 0.0;
  const auto m = replicate(o.closed_form, in, beta, o.replications, rng);
  const Eigen::VectorXd expected = conjugate::estimator_mean(beta, in);
  const Eigen::VectorXd se = (conjugate::estimator_variance(in) / o.replications).cwiseSqrt();
  const double worst = ((m.mean - expected).cwiseAbs().array() / se.array()).maxCoeff();
  return {"estimator_mean_vs_monte_carlo", "|MC mean - formula| < 3 standard errors", worst, 3.0,
          worst < 3.0, std::to_string(o.replications) + " replications"};
}

CheckResult check_variance_bound(const BatteryOptions& o) {
  Rng rng = make_stream(o.seed, {3});
  double worst = 0.0;  // largest ratio MC variance / bound
  for (int i = 0; i < 5; ++i) {
    const auto in = random_instance(rng, 2 + i);
    const auto m = replicate(o.closed_form, in, in.y_bar, o.replications, rng);
    worst = std::max(worst, (m.var.array() / conjugate::variance_upper_bound(in).array()).maxCoeff());
  }
  return {"variance_upper_bound", "MC variance / bound <= 1", worst, 1.0, worst <= 1.0,
          std::to_string(o.replications) + " replications on 5 instances"};
}

CheckResult check_shrinkage(const BatteryOptions& o) {
  const double h = 10.0, c = 1.0;
  const auto k = conjugate::shrinkage_coefficients(h, c);
  Rng rng = make_stream(o.seed, {4});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in;
  const Eigen::Index n = 4;
  in.sigma_beta_sq = 0.5;
  in.s_sq = Eigen::VectorXd::NullaryExpr(n, [&] { return in.sigma_beta_sq / h * (0.2 + 0.8 * u(rng)); });
  in.s_sq[0] = h * in.sigma_beta_sq;
  in.sigma_mu_sq = c * in.sigma_beta_sq;
  in.y_bar = Eigen::VectorXd::Zero(n);
  const bool condition = conjugate::satisfies_condition_one(in, 0, c);
  const auto m = replicate(o.closed_form, in, in.y_bar, o.replications, rng);
  const double ratio = m.var[0] / (k.c1 * in.s_sq[0]);
  CheckResult r{"shrinkage_condition_one", "c1(10) < 1 and Var(beta_hat_f) / (c1 s_f^2) <= 1",
                ratio, 1.0, condition && k.c1 < 1.0 && ratio <= 1.0, ""};
  r.detail = "c1 = " + fmt(k.c1) + ", c2 = " + fmt(k.c2) + ", " + std::to_string(o.replications) +
             " replications";
  return r;
}

CheckResult check_sampler(const BatteryOptions& o) {
  Rng rng = make_stream(o.seed, {1});  // the quadrature instances
  double worst = 0.0, sum_sq = 0.0;
  int checks = 0, exceed = 0;
  for (int i = 0; i < o.mcmc_instances; ++i) {
    const auto in = random_instance(rng, cells_for(i, o.max_cells));
    SamplerConfig cfg;
    cfg.kept_draws = 1000;
    cfg.seed = derive_seed(o.seed, {5, static_cast<std::uint64_t>(i)});
    const auto s = sample(conjugate::as_target(in), cfg);
    const auto post = o.closed_form(in);
    for (Eigen::Index f = 0; f < in.size(); ++f) {
      const int d = static_cast<int>(f);
      const Eigen::VectorXd col = s.column(d);
      const double mean = col.mean();
      const Eigen::ArrayXd dev_sq = (col.array() - mean).square();
      const double var = dev_sq.sum() / (col.size() - 1.0);
      const double ess = s.diagnostics.effective_sample_size[static_cast<std::size_t>(f)];
      const double mean_se = std::sqrt(var / ess);

      std::vector<Eigen::VectorXd> sq;
      for (int c = 0; c < s.chains(); ++c)
        sq.push_back((s.chain(c).col(d).array() - mean).square().matrix());
      const double sq_sd = std::sqrt((dev_sq - dev_sq.mean()).square().sum() / (dev_sq.size() - 1.0));
      const double var_se = sq_sd / std::sqrt(effective_sample_size(sq));

      for (double z : {(mean - post.beta_hat[f]) / mean_se, (var - post.sigma_hat_sq[f]) / var_se}) {
        worst = std::max(worst, std::abs(z));
        sum_sq += z * z;
        exceed += std::abs(z) >= 3.0;
        ++checks;
      }
    }
  }
  return {"sampler_vs_closed_form", "every mean and variance within 3 Monte-Carlo SE", worst, 3.0,
          worst < 3.0,
          std::to_string(checks) + " moments on " + std::to_string(o.mcmc_instances) + " targets; " +
              std::to_string(exceed) + " beyond 3 SE (" + std::to_string(0.0027 * checks) +
              " expected by chance); rms z " + std::to_string(std::sqrt(sum_sq / checks))};
}

std::vector<CheckResult> run_battery(const BatteryOptions& o) {
  return {check_quadrature(o), check_estimator_mean(o), check_variance_bound(o), check_shrinkage(o),
          check_sampler(o)};
}

}  // namespace hbab::oracle
