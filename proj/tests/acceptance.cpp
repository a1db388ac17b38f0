// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance <path to hbab executable> [work dir]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hbab/conjugate.hpp"
#include "hbab/design.hpp"
#include "hbab/glm.hpp"
#include "hbab/metaprior.hpp"
#include "hbab/random.hpp"
#include "hbab/sim.hpp"
#include "io.hpp"
#include "oracle_battery.hpp"

namespace fs = std::filesystem;
using namespace hbab;

namespace {

// Master seed for the desk-scale suites, fixed before any run.
constexpr std::uint64_t kSuiteSeed = 20261016;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ------------------------------------------------------------------------

Outcome oracle_equivalence() {
  oracle::BatteryOptions o;
  const auto q = oracle::check_quadrature(o);
  const auto s = oracle::check_sampler(o);
  return {q.passed && s.passed, "quadrature max error " + fmt(q.observed) + "; sampler worst |z| " +
                                    fmt(s.observed) + " (" + s.detail + ")"};
}

Outcome gradient() {
  const ExperimentSpec spec = uniform_spec(2, 2, 4);
  const DesignMatrix X = build_design_matrix(spec, 2);
  const Hyperparams h;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> traffic(0, 60);
  double worst = 0.0;
  for (int point = 0; point < 100; ++point) {
    ModelParams p;
    p.beta = Eigen::VectorXd::NullaryExpr(X.cols(), [&] { return 0.3 * z(rng); });
    p.mu = 0.3 * z(rng);
    p.log_sigma = 0.5 * z(rng) - 1.0;
    p.epsilon = 0.3 * z(rng);
    CountData d;
    for (std::size_t k = 0; k < spec.num_cells(); ++k) {
      const int a = traffic(rng);
      d.assignments.push_back(a);
      d.responses.push_back(std::uniform_int_distribution<int>(0, a)(rng));
    }
    const Eigen::VectorXd x = flatten(p);
    const Eigen::VectorXd g = grad_log_posterior(p, d, X, h);
    const double step = 1e-6;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::VectorXd hi = x, lo = x;
      hi[i] += step;
      lo[i] -= step;
      const double fd =
          (log_posterior(unflatten(hi), d, X, h) - log_posterior(unflatten(lo), d, X, h)) / (2 * step);
      worst = std::max(worst, std::abs(g[i] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return {worst < 1e-5, "max relative error " + fmt(worst) + " over 100 points, 116 coordinates"};
}

Outcome shrinkage() {
  const auto r = oracle::check_shrinkage({});
  return {r.passed, r.detail + "; Var/(c1 s_f^2) = " + fmt(r.observed)};
}

Outcome design_counts() {
  const ExperimentSpec spec = uniform_spec(2, 2, 4);
  const DesignMatrix X = build_design_matrix(spec, 2);
  const std::size_t pairs = enumerate_comparisons(spec).size();
  const bool ok = spec.num_cells() == 256 && X.cols() == 113 && pairs == 1920;
  return {ok, std::to_string(spec.num_cells()) + " cells, " + std::to_string(X.cols()) + " columns, " +
                  std::to_string(pairs) + " comparisons"};
}

Outcome naive_inflation() {
  sim::NaiveTestConfig c;
  c.seed = kSuiteSeed;
  const double fpr = sim::naive_sequential_fpr(c).back();
  return {fpr >= 0.23 && fpr <= 0.33, "cumulative FPR after 30 looks " + fmt(fpr)};
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct DeskSuite {
  sim::MetricsReport report;
  int updates = 0;
};

DeskSuite low_power_suite() {
  sim::ScenarioConfig c = sim::ScenarioConfig::desk(sim::Power::low);
  c.seed = kSuiteSeed;
  return {sim::run_scenario(c).report, c.updates};
}

Outcome estimator_dominance(const DeskSuite& s) {
  const auto& hb = s.report.final_rmse_by_rep.at("hb");
  const auto& mle = s.report.final_rmse_by_rep.at("mle");
  int wins = 0;
  for (std::size_t r = 0; r < hb.size(); ++r) wins += hb[r] <= mle[r];
  const double spread_hb = mean(s.report.final_h0_spread_by_rep.at("hb"));
  const double spread_mle = mean(s.report.final_h0_spread_by_rep.at("mle"));
  return {wins >= 7 && spread_hb < spread_mle,
          "RMSE wins " + std::to_string(wins) + "/" + std::to_string(hb.size()) + "; H0 spread hb " +
              fmt(spread_hb) + " vs mle " + fmt(spread_mle)};
}

Outcome error_ordering(const DeskSuite& s) {
  const auto& r = s.report;
  const double fpr_hb = r.get(s.updates, "hb", "fixed", "fpr");
  const double fpr_mle = r.get(s.updates, "mle", "fixed", "fpr");
  const double fnr_hb = r.get(s.updates, "hb", "fixed", "fnr");
  const double fnr_mle = r.get(s.updates, "mle", "fixed", "fnr");
  return {fpr_hb <= fpr_mle && fnr_hb <= fnr_mle, "FPR hb " + fmt(fpr_hb) + " vs mle " + fmt(fpr_mle) +
                                                      "; FNR hb " + fmt(fnr_hb) + " vs mle " + fmt(fnr_mle)};
}

Outcome tau_strategies() {
  // (a) recovery from a self-generated corpus
  std::mt19937_64 rng(kSuiteSeed);
  std::normal_distribution<double> z;
  const double tau_true = 0.01, noise_sd = 0.02;
  std::vector<EffectObservation> effects;
  for (int i = 0; i < 200; ++i)
    effects.push_back({std::sqrt(noise_sd * noise_sd + tau_true) * z(rng), noise_sd});
  SamplerConfig cfg;
  cfg.seed = kSuiteSeed;
  const double learnt = learn_tau(effects, cfg).point_value;
  const bool a = learnt >= 0.005 && learnt <= 0.02;

  // (b) dynamic vs fixed under high power
  sim::ScenarioConfig high = sim::ScenarioConfig::desk(sim::Power::high);
  high.seed = kSuiteSeed;
  high.methods = {sim::Method::hierarchical};
  const auto rh = sim::tau_experiment(high).report;
  const double fpr_dynamic = rh.get(high.updates, "hb", "dynamic", "fpr");
  const double fpr_fixed = rh.get(high.updates, "hb", "fixed", "fpr");
  const bool b = fpr_dynamic > fpr_fixed;

  // (c) learnt vs fixed under low power
  sim::ScenarioConfig low = sim::ScenarioConfig::desk(sim::Power::low);
  low.seed = kSuiteSeed;
  low.methods = {sim::Method::hierarchical};
  const auto rl = sim::tau_experiment(low);
  const double fnr_learnt = rl.report.get(low.updates, "hb", "learnt", "fnr");
  const double fnr_fixed = rl.report.get(low.updates, "hb", "fixed", "fnr");
  const bool c = fnr_learnt <= fnr_fixed;

  return {a && b && c, std::string("(a) ") + (a ? "ok" : "FAIL") + " learnt tau " + fmt(learnt) + "; (b) " +
                           (b ? "ok" : "FAIL") + " H0 FPR dynamic " + fmt(fpr_dynamic) + " vs fixed " +
                           fmt(fpr_fixed) + "; (c) " + (c ? "ok" : "FAIL") + " FNR learnt " +
                           fmt(fnr_learnt) + " (tau " + fmt(rl.learnt_tau->point_value) + ") vs fixed " +
                           fmt(fnr_fixed)};
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  fs::create_directories(work);
  const fs::path config = work / "determinism.json";
  io::write_file(config, R"({"power": "low", "scale": "desk", "tau": ["fixed:0.1", "dynamic"]})");
  for (const char* run_name : {"run1", "run2"}) {
    const int code = run(cli + " simulate " + config.string() + " --seed 7 --out " + (work / run_name).string() +
                         " > /dev/null");
    if (code != 0) return {false, std::string(run_name) + " exited with " + std::to_string(code)};
  }
  int compared = 0;
  for (const char* name : {"metrics.csv", "decisions.csv", "estimates.csv", "truth.csv"}) {
    if (io::read_file(work / "run1" / name) != io::read_file(work / "run2" / name))
      return {false, std::string(name) + " differs"};
    ++compared;
  }
  return {true, std::to_string(compared) + " CSV files byte-identical"};
}

// Five contexts, two contents. Context r1 favours B by 3 points; the others
// favour A by 0.75 points, so the traffic-weighted marginal difference is zero.
Outcome real_world_pipeline(const std::string& cli, const fs::path& work) {
  fs::create_directories(work);
  const fs::path design = work / "design.json";
  const fs::path counts = work / "counts.csv";
  io::write_file(design, R"({"factors": [
  {"name": "variant", "role": "content", "values": ["A", "B"]},
  {"name": "region", "role": "context", "values": ["r1", "r2", "r3", "r4", "r5"]}]})");
  const std::vector<std::string> regions{"r1", "r2", "r3", "r4", "r5"};
  Rng rng = make_stream(kSuiteSeed, {10});
  std::ostringstream out;
  out << "update,variant,region,assignments,responses\n";
  const int n = 500;
  for (int u = 1; u <= 60; ++u)
    for (const char* v : {"A", "B"})
      for (const auto& r : regions) {
        const double p = std::string(v) == "A" ? 0.10 : (r == "r1" ? 0.13 : 0.0925);
        std::binomial_distribution<int> draw(n, p);
        out << u << ',' << v << ',' << r << ',' << n << ',' << draw(rng) << '\n';
      }
  io::write_file(counts, out.str());
  const fs::path dir = work / "analyze";
  const int code = run(cli + " analyze " + design.string() + " " + counts.string() +
                       " --method hb --tau fixed:0.1 --seed 3 --chains 2 --warmup 500 --kept 500 --out " +
                       dir.string() + " > /dev/null");
  if (code != 0) return {false, "analyze exited with " + std::to_string(code)};

  auto final_rows = [](const fs::path& p) {
    std::istringstream in(io::read_file(p));
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line))
      if (line.rfind("60,", 0) == 0) rows.push_back(io::split(line));
    return rows;
  };
  // columns: update,context,content_a,content_b,...,significant(10)
  int significant_contexts = 0;
  bool r1 = false;
  for (const auto& row : final_rows(dir / "comparisons.csv"))
    if (row[10] == "1") {
      ++significant_contexts;
      r1 = r1 || row[1] == "region=r1";
    }
  const auto marginal = final_rows(dir / "marginal_comparisons.csv");
  const bool marginal_null = marginal.size() == 1 && marginal[0][10] == "0";
  return {r1 && marginal_null, std::to_string(significant_contexts) +
                                   "/5 contexts significant (r1 " + (r1 ? "yes" : "no") +
                                   "), marginal p_min " + (marginal.empty() ? "missing" : marginal[0][9]) +
                                   (marginal_null ? " not significant" : " significant")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <hbab executable> [work dir]\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "hbab_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && secs > limit_s) {
      o.passed = false;
      o.detail += "; over the " + fmt(limit_s) + " s budget";
    }
    failures += !o.passed;
    std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail << " ["
              << fmt(secs) << " s]" << std::endl;
  };

  report(1, "conjugate-oracle equivalence", 120, oracle_equivalence);
  report(2, "gradient correctness", 60, gradient);
  report(3, "shrinkage", 60, shrinkage);
  report(4, "design counts", 0, design_counts);
  report(5, "naive sequential FPR inflation", 120, naive_inflation);
  DeskSuite low;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    low = low_power_suite();
  } catch (const std::exception& e) {
    std::cerr << "low-power suite failed: " << e.what() << '\n';
  }
  const double suite_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(6, "estimator dominance", 0, [&] {
    Outcome o = estimator_dominance(low);
    if (suite_s > 1800) {
      o.passed = false;
      o.detail += "; suite over the 1800 s budget";
    }
    o.detail += "; suite " + fmt(suite_s) + " s";
    return o;
  });
  report(7, "error-rate ordering", 0, [&] { return error_ordering(low); });
  report(8, "tau strategies", 0, tau_strategies);
  report(9, "determinism", 0, [&] { return determinism(cli, work / "c9"); });
  report(10, "analyze pipeline", 0, [&] { return real_world_pipeline(cli, work / "c10"); });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criterion(s) failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
