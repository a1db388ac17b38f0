#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hbab/sampler.hpp"

using namespace hbab;

namespace {

Target gaussian(const Eigen::MatrixXd& cov) {
  const Eigen::MatrixXd prec = cov.inverse();
  Target t;
  t.dimension = static_cast<int>(cov.rows());
  for (int i = 0; i < t.dimension; ++i) t.labels.push_back("x" + std::to_string(i));
  t.log_density_gradient = [prec](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    g = -prec * q;
    return 0.5 * q.dot(g);
  };
  return t;
}

SamplerConfig config(int kept, std::uint64_t seed) {
  SamplerConfig c;
  c.kept_draws = kept;
  c.warmup_draws = 500;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("standard normal") {
  const auto s = sample(gaussian(Eigen::MatrixXd::Identity(1, 1)), config(1000, 1));
  CHECK(s.chains() == 4);
  CHECK(s.kept_draws() == 1000);
  const auto sum = posterior_summary(s, "x0");
  CHECK(std::abs(sum.mean) < 0.05);
  CHECK(std::abs(sum.sd - 1.0) < 0.05);
  CHECK(s.diagnostics.split_r_hat[0] < 1.01);
  CHECK(s.diagnostics.effective_sample_size[0] > 400);
  CHECK_FALSE(s.diagnostics.divergence_warning);
}

TEST_CASE("correlated gaussian covariance") {
  Eigen::MatrixXd cov(3, 3);
  cov << 1.0, 0.8, 0.6, 0.8, 2.0, 0.9, 0.6, 0.9, 1.5;
  const auto s = sample(gaussian(cov), config(4000, 2));
  const Eigen::MatrixXd d = s.stacked();
  const Eigen::MatrixXd centered = d.rowwise() - d.colwise().mean();
  const Eigen::MatrixXd S = centered.transpose() * centered / static_cast<double>(d.rows() - 1);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(S(i, j) - cov(i, j)) <= 0.1 * std::abs(cov(i, j)));
}

TEST_CASE("determinism and serial/parallel equality") {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.5;
  auto c = config(200, 42);
  c.execution = Execution::serial;
  const auto a = sample(gaussian(cov), c);
  const auto b = sample(gaussian(cov), c);
  c.execution = Execution::parallel;
  const auto p = sample(gaussian(cov), c);
  for (int ch = 0; ch < a.chains(); ++ch) {
    CHECK(a.chain(ch) == b.chain(ch));
    CHECK(a.chain(ch) == p.chain(ch));
  }
  c.seed = 43;
  CHECK_FALSE(sample(gaussian(cov), c).chain(0) == a.chain(0));
}

TEST_CASE("chain streams do not depend on chain count") {
  auto c = config(100, 9);
  c.chains = 2;
  const auto two = sample(gaussian(Eigen::MatrixXd::Identity(2, 2)), c);
  c.chains = 3;
  const auto three = sample(gaussian(Eigen::MatrixXd::Identity(2, 2)), c);
  CHECK(two.chain(1) == three.chain(1));
}

TEST_CASE("summaries") {
  {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(10, 3.5);
    const auto s = summarize(v);
    CHECK(s.mean == 3.5);
    CHECK(s.sd == 0.0);
  }
  {
    Eigen::VectorXd v(4);
    v << 1, 2, 3, 4;
    CHECK(summarize(v).mean == 2.5);
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  }
  const auto s = sample(gaussian(Eigen::MatrixXd::Identity(1, 1)), config(2000, 4));
  CHECK(std::abs(posterior_summary(s, "x0").q975 - 1.96) < 0.1);
  CHECK_THROWS_AS(posterior_summary(s, "nope"), SamplerError);
}

TEST_CASE("leapfrog is reversible and nearly conserves energy") {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.4, 0.4, 0.8;
  const Target t = gaussian(cov);
  const Eigen::VectorXd inv_metric = Eigen::VectorXd::Ones(2);
  Eigen::VectorXd q0(2), p0(2), g;
  q0 << 0.7, -0.3;
  p0 << -0.2, 1.1;
  Eigen::VectorXd q = q0, p = p0;
  const double lp0 = t.log_density_gradient(q, g);
  const double h0 = detail::hamiltonian(lp0, p, inv_metric);
  const double lp1 = detail::leapfrog(t, inv_metric, 0.1, 25, q, p, g);
  const double h1 = detail::hamiltonian(lp1, p, inv_metric);
  CHECK(std::abs(h1 - h0) < 0.05);
  p = -p;
  detail::leapfrog(t, inv_metric, 0.1, 25, q, p, g);
  CHECK((q - q0).norm() < 1e-10);
  CHECK((-p - p0).norm() < 1e-10);
}

TEST_CASE("diagnostics") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  std::vector<Eigen::VectorXd> iid(4, Eigen::VectorXd(1000));
  for (auto& c : iid)
    for (auto& x : c) x = n01(rng);
  CHECK(split_r_hat(iid) < 1.01);
  const double ess = effective_sample_size(iid);
  CHECK(ess > 3000);
  CHECK(ess < 5000);

  auto shifted = iid;
  shifted[0].array() += 3.0;
  CHECK(split_r_hat(shifted) > 1.1);
}

TEST_CASE("errors") {
  Target bad = gaussian(Eigen::MatrixXd::Identity(1, 1));
  bad.log_density_gradient = [](const Eigen::VectorXd&, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(1);
    return std::nan("");
  };
  CHECK_THROWS_AS(sample(bad, config(100, 1)), SamplerError);
  CHECK_THROWS_AS(sample(gaussian(Eigen::MatrixXd::Identity(1, 1)), config(50, 1)), SamplerError);
}

TEST_CASE("draw dump") {
  auto c = config(100, 5);
  c.chains = 2;
  c.warmup_draws = 100;
  const auto s = sample(gaussian(Eigen::MatrixXd::Identity(2, 2)), c);
  std::ostringstream out;
  write_draws_csv(s, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "chain,draw,parameter,value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * 100 * 2);
}
