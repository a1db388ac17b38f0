// Serial reference vs OpenMP path for the parallel kernels.
#include <benchmark/benchmark.h>

#include <random>

#include "hbab/design.hpp"
#include "hbab/estimate.hpp"
#include "hbab/parallel.hpp"
#include "hbab/sampler.hpp"
#include "hbab/seqtest.hpp"
#include "hbab/sim.hpp"

using namespace hbab;

namespace {

Execution exec_of(const benchmark::State& state) {
  return state.range(0) ? Execution::parallel : Execution::serial;
}

// Fake posterior draws for every paper-scale cell.
std::vector<CellEstimate> synthetic_estimates(std::size_t cells, std::size_t draws) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  std::vector<CellEstimate> out(cells);
  for (auto& e : out) {
    e.draws.resize(draws);
    double sum = 0.0, ss = 0.0;
    for (auto& d : e.draws) {
      d = 0.5 + 0.01 * z(rng);
      sum += d;
      ss += d * d;
    }
    e.mean = sum / draws;
    e.variance = ss / draws - e.mean * e.mean;
  }
  return out;
}

void BM_hb_estimate(benchmark::State& state) {
  const ExperimentSpec spec = uniform_spec(2, 2, 4);
  const DesignMatrix X = build_design_matrix(spec, 2);
  const auto K = X.cols();
  std::vector<std::string> labels;
  for (Eigen::Index j = 0; j < K; ++j) labels.push_back("beta[" + std::to_string(j) + "]");
  for (const char* l : {"mu", "sigma", "epsilon"}) labels.push_back(l);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  std::vector<Eigen::MatrixXd> chains(4, Eigen::MatrixXd(1000, K + 3));
  for (auto& c : chains) c = c.unaryExpr([&](double) { return 0.1 * z(rng); });
  const PosteriorSamples samples(labels, chains);
  for (auto _ : state) benchmark::DoNotOptimize(hb_estimate(samples, X, exec_of(state)));
}

void BM_run_all_comparisons(benchmark::State& state) {
  const ExperimentSpec spec = uniform_spec(2, 2, 4);
  const auto estimates = synthetic_estimates(spec.num_cells(), 4000);
  const TauSpec tau = TauSpec::fixed(0.1);
  for (auto _ : state)
    benchmark::DoNotOptimize(run_all_comparisons(estimates, spec, tau, 0.05, {}, exec_of(state)));
}

void BM_sampler_chains(benchmark::State& state) {
  Target t;
  t.dimension = 20;
  t.log_density_gradient = [](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    g = -q;
    return -0.5 * q.squaredNorm();
  };
  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.execution = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(sample(t, cfg));
}

void BM_naive_fpr(benchmark::State& state) {
  sim::NaiveTestConfig cfg;
  cfg.execution = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(sim::naive_sequential_fpr(cfg));
}

}  // namespace

BENCHMARK(BM_hb_estimate)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_run_all_comparisons)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sampler_chains)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_naive_fpr)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
