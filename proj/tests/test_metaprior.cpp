#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hbab/metaprior.hpp"

using namespace hbab;

namespace {

std::vector<EffectObservation> synthetic(double tau, int n, double noise_sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<EffectObservation> out;
  for (int i = 0; i < n; ++i)
    out.push_back({std::sqrt(noise_sd * noise_sd + tau) * z(rng), noise_sd});
  return out;
}

SamplerConfig tau_config(std::uint64_t seed) {
  SamplerConfig c;
  c.seed = seed;
  c.kept_draws = 1000;
  return c;
}

// Posterior mean of tau by integrating over log tau on a grid.
double grid_mean(const std::vector<EffectObservation>& e) {
  const double lo = -30.0, hi = 8.0;
  const int n = 200000;
  const double h = (hi - lo) / n;
  std::vector<double> lp(n + 1);
  for (int i = 0; i <= n; ++i) lp[static_cast<std::size_t>(i)] = log_tau_posterior(e, lo + i * h);
  const double top = *std::max_element(lp.begin(), lp.end());
  double z = 0.0, m = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = std::exp(lp[static_cast<std::size_t>(i)] - top) * ((i == 0 || i == n) ? 0.5 : 1.0);
    z += w;
    m += w * std::exp(lo + i * h);
  }
  return m / z;
}

}  // namespace

TEST_CASE("recovers tau from a self-generated corpus") {
  const auto effects = synthetic(0.01, 200, 0.02, 1);
  const auto t = learn_tau(effects, tau_config(2));
  CHECK(t.posterior_mean >= 0.005);
  CHECK(t.posterior_mean <= 0.02);
  CHECK(t.point_value == t.posterior_mean);
  CHECK(t.corpus_size == 200);
  CHECK(t.q025 < t.q50);
  CHECK(t.q50 < t.q975);
}

TEST_CASE("no excess dispersion") {
  std::vector<EffectObservation> zeros(50, {0.0, 1e-3});
  const auto t = learn_tau(zeros, tau_config(3));
  CHECK(t.q95 < 1e-3);
}

TEST_CASE("floor") {
  std::vector<EffectObservation> zeros(50, {0.0, 1e-3});
  MetapriorOptions o;
  o.floor = 1.0;
  const auto t = learn_tau(zeros, tau_config(3), o);
  CHECK(t.floored);
  CHECK(t.point_value == 1.0);
  CHECK_FALSE(t.warnings.empty());
}

TEST_CASE("matches grid integration on small corpora") {
  for (std::uint64_t seed : {5, 6, 7}) {
    const auto effects = synthetic(0.5, 5 + static_cast<int>(seed), 0.4, seed);
    const auto draws = sample_tau(effects, tau_config(seed + 10));
    double m = 0.0, sq = 0.0;
    for (double d : draws) {
      m += d;
      sq += d * d;
    }
    m /= static_cast<double>(draws.size());
    const double sd = std::sqrt(sq / static_cast<double>(draws.size()) - m * m);
    // Heavy tails leave ESS well below the draw count; 300 is conservative.
    CHECK(std::abs(m - grid_mean(effects)) < 4.0 * sd / std::sqrt(300.0));
  }
}

TEST_CASE("gradient of the tau target") {
  const auto effects = synthetic(0.1, 8, 0.2, 9);
  const Target t = tau_target(effects);
  for (double x : {-6.0, -2.0, 0.0, 1.5}) {
    Eigen::VectorXd q(1), g;
    q[0] = x;
    t.log_density_gradient(q, g);
    const double fd = (log_tau_posterior(effects, x + 1e-6) - log_tau_posterior(effects, x - 1e-6)) / 2e-6;
    CHECK(g[0] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("permutation invariance and scale equivariance") {
  auto effects = synthetic(0.05, 30, 0.1, 11);
  const auto a = learn_tau(effects, tau_config(12));
  std::reverse(effects.begin(), effects.end());
  const auto b = learn_tau(effects, tau_config(12));
  // Reordering changes only floating-point summation order.
  CHECK(b.posterior_mean == doctest::Approx(a.posterior_mean).epsilon(0.02));

  // Scaling effects by k scales tau by k^2; the prior is not scale-free, so
  // compare against the grid oracle at each scale.
  for (double k : {0.1, 3.0}) {
    auto scaled = effects;
    for (auto& e : scaled) {
      e.delta *= k;
      e.noise_sd *= k;
    }
    const double exact = grid_mean(scaled);
    CHECK(learn_tau(scaled, tau_config(13)).posterior_mean == doctest::Approx(exact).epsilon(0.1));
    CHECK(exact / grid_mean(effects) == doctest::Approx(k * k).epsilon(0.15));
  }
}

TEST_CASE("corpus handling") {
  CHECK_THROWS_AS(learn_tau({}, tau_config(1)), MetapriorError);
  CHECK_THROWS_AS(learn_tau({{0.1, 0.1}}, tau_config(1)), MetapriorError);
  CHECK_THROWS_AS(learn_tau({{0.1, 0.1}, {0.2, 0.0}}, tau_config(1)), MetapriorError);

  ComparisonResult r;
  r.diff_mean = 0.02;
  r.diff_var = 1e-4;
  const auto e = collect_effects({{r}});
  REQUIRE(e.size() == 1);
  CHECK(e[0].delta == 0.02);
  CHECK(e[0].noise_sd == doctest::Approx(0.01));

  ComparisonResult degenerate = r;
  degenerate.degenerate = true;
  CHECK(collect_effects({{r, degenerate}, {r}}).size() == 2);
  CHECK(collect_effects({{r}}, [](const ComparisonResult&) { return false; }).empty());

  const auto s = split_halves(80);
  CHECK(s.train.size() == 40);
  CHECK(s.train.back() == 39);
  CHECK(s.test.front() == 40);
}
