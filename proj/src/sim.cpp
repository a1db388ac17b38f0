#include "hbab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hbab/random.hpp"

namespace hbab::sim {

namespace {

constexpr double kPaperCells = 256.0;

std::int64_t scaled_traffic(std::int64_t paper_traffic, std::size_t cells) {
  return static_cast<std::int64_t>(
      std::llround(static_cast<double>(paper_traffic) * static_cast<double>(cells) / kPaperCells));
}

std::uint64_t repetition_seed(const ScenarioConfig& config, int repetition) {
  return derive_seed(config.seed, {static_cast<std::uint64_t>(repetition)});
}

std::uint64_t arm_id(Arm a) { return static_cast<std::uint64_t>(a); }

}  // namespace

std::string method_name(Method m) { return m == Method::hierarchical ? "hb" : "mle"; }

std::string arm_name(Arm a) {
  switch (a) {
    case Arm::combined:
      return "combined";
    case Arm::h1:
      return "h1";
    case Arm::h0:
      return "h0";
  }
  return {};
}

std::vector<Arm> arms_for(const ScenarioConfig& config) {
  if (config.h0_mode == H0Mode::separate) return {Arm::h1, Arm::h0};
  return {Arm::combined};
}

std::size_t ScenarioConfig::h1_context_values() const {
  if (spec.context_factors().empty()) return 0;
  const auto L = spec.context_factors()[0].values.size();
  const auto n = static_cast<std::size_t>(std::llround(h1_fraction * static_cast<double>(L)));
  return std::clamp<std::size_t>(n, 1, L - 1);
}

bool ScenarioConfig::is_h1_context(std::size_t context_combo) const {
  const std::size_t M = spec.content_factors().size();
  const Cell cell = cell_at(spec, spec.cell_index(0, context_combo));
  return static_cast<std::size_t>(cell.value_index[M]) < h1_context_values();
}

void ScenarioConfig::validate() const {
  if (spec.num_factors() < 2) throw ConfigError("simulation needs at least 2 factors");
  if (spec.num_content_combos() < 2) throw ConfigError("need at least 2 content combinations");
  if (updates < 0) throw ConfigError("updates must be >= 0");
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (assignments_per_update < static_cast<std::int64_t>(spec.num_cells()))
    throw ConfigError("assignments per update must be at least the number of cells (" +
                      std::to_string(spec.num_cells()) + ")");
  if (!(interaction_effect.sd >= 0.0)) throw ConfigError("interaction sd must be >= 0");
  if (!(h1_fraction > 0.0 && h1_fraction < 1.0))
    throw ConfigError("h1_fraction must lie in (0, 1)");
  if (h0_mode == H0Mode::combined && spec.context_factors().empty())
    throw ConfigError("combined H0 mode needs a context factor; use separate");
  if (interaction_order != 1 && interaction_order != 2)
    throw ConfigError("interaction_order must be 1 or 2");
  if (methods.empty()) throw ConfigError("at least one method is required");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  std::set<TauKind> kinds;
  for (const auto& t : tau_specs) {
    t.validate();
    if (t.kind == TauKind::learnt) throw ConfigError("learnt tau is produced by the run itself");
    if (!kinds.insert(t.kind).second) throw ConfigError("each tau kind may appear once");
  }
  if (tau_specs.empty() && !learn_tau) throw ConfigError("at least one tau spec is required");
  if (learn_tau) {
    if (repetitions < 2) throw ConfigError("learning tau needs at least 2 repetitions");
    if (std::find(methods.begin(), methods.end(), metaprior_method) == methods.end())
      throw ConfigError("the metaprior method must be one of the simulated methods");
  }
  fit.hyper.validate();
  fit.sampler.validate();
  if (learn_tau) metaprior_sampler.validate();
}

ScenarioConfig ScenarioConfig::paper(Power power) {
  ScenarioConfig c;
  c.power = power;
  c.spec = uniform_spec(2, 2, 4);
  c.updates = 30;
  c.repetitions = 80;
  if (power == Power::high) {
    c.assignments_per_update = 100000;
    c.interaction_effect = {0.5, 0.5};
  } else {
    c.assignments_per_update = 2500;
    c.interaction_effect = {0.2, 0.2};
  }
  return c;
}

ScenarioConfig ScenarioConfig::desk(Power power) {
  ScenarioConfig c = paper(power);
  c.spec = uniform_spec(2, 2, 2);
  c.updates = 10;
  c.repetitions = 8;
  c.assignments_per_update = scaled_traffic(c.assignments_per_update, c.spec.num_cells());
  return c;
}

namespace {

Method parse_method(const std::string& s) {
  if (s == "hb" || s == "hierarchical") return Method::hierarchical;
  if (s == "mle") return Method::mle;
  throw ConfigError("unknown method '" + s + "'");
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

ScenarioConfig parse_scenario_config(const std::string& json_text, std::optional<Scale> scale) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");

  std::string power = "low";
  read(j, "power", power);
  if (power != "low" && power != "high") throw ConfigError("power must be 'low' or 'high'");
  const Power p = power == "high" ? Power::high : Power::low;

  std::string scale_text = "desk";
  read(j, "scale", scale_text);
  if (scale_text != "desk" && scale_text != "paper")
    throw ConfigError("scale must be 'desk' or 'paper'");
  const Scale s = scale.value_or(scale_text == "paper" ? Scale::paper : Scale::desk);

  ScenarioConfig c = s == Scale::paper ? ScenarioConfig::paper(p) : ScenarioConfig::desk(p);

  if (j.contains("spec")) {
    try {
      c.spec = parse_experiment_spec(j["spec"].dump());
    } catch (const DesignError& e) {
      throw ConfigError(e.what());
    }
    if (!j.contains("assignments_per_update"))
      c.assignments_per_update = scaled_traffic(
          p == Power::high ? 100000 : 2500, c.spec.num_cells());
  }
  read(j, "updates", c.updates);
  read(j, "assignments_per_update", c.assignments_per_update);
  read(j, "repetitions", c.repetitions);
  read(j, "seed", c.seed);
  if (j.contains("interaction_effect")) {
    read(j["interaction_effect"], "mean", c.interaction_effect.mean);
    read(j["interaction_effect"], "sd", c.interaction_effect.sd);
  }
  read(j, "h1_fraction", c.h1_fraction);
  std::string mode = c.h0_mode == H0Mode::combined ? "combined" : "separate";
  read(j, "h0_mode", mode);
  if (mode == "combined")
    c.h0_mode = H0Mode::combined;
  else if (mode == "separate")
    c.h0_mode = H0Mode::separate;
  else
    throw ConfigError("h0_mode must be 'combined' or 'separate'");
  read(j, "interaction_order", c.interaction_order);
  read(j, "alpha", c.alpha);

  if (j.contains("methods")) {
    std::vector<std::string> names;
    read(j, "methods", names);
    c.methods.clear();
    for (const auto& n : names) c.methods.push_back(parse_method(n));
  }
  if (j.contains("tau")) {
    std::vector<std::string> taus;
    read(j, "tau", taus);
    c.tau_specs.clear();
    c.learn_tau = false;
    for (const auto& t : taus) {
      if (t == "learnt") {
        c.learn_tau = true;
        continue;
      }
      try {
        c.tau_specs.push_back(parse_tau_spec(t));
      } catch (const TestError& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (j.contains("sampler")) {
    const auto& sj = j["sampler"];
    read(sj, "chains", c.fit.sampler.chains);
    read(sj, "warmup", c.fit.sampler.warmup_draws);
    read(sj, "kept", c.fit.sampler.kept_draws);
    read(sj, "target_accept", c.fit.sampler.target_accept);
    read(sj, "max_tree_depth", c.fit.sampler.max_tree_depth);
  }
  if (j.contains("hyper")) {
    const auto& hj = j["hyper"];
    read(hj, "mu_prior_mean", c.fit.hyper.mu_prior_mean);
    read(hj, "mu_prior_sd", c.fit.hyper.mu_prior_sd);
    read(hj, "sigma_cauchy_scale", c.fit.hyper.sigma_cauchy_scale);
  }
  std::string param = "noncentered";
  read(j, "parameterization", param);
  if (param == "noncentered")
    c.fit.parameterization = Parameterization::noncentered;
  else if (param == "centered")
    c.fit.parameterization = Parameterization::centered;
  else
    throw ConfigError("parameterization must be 'centered' or 'noncentered'");
  if (j.contains("metaprior")) {
    const auto& mj = j["metaprior"];
    std::string m = method_name(c.metaprior_method);
    read(mj, "method", m);
    c.metaprior_method = parse_method(m);
    read(mj, "cauchy_scale", c.metaprior.cauchy_scale);
    read(mj, "floor", c.metaprior.floor);
  }
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ScenarioConfig load_scenario_config(const std::string& path, std::optional<Scale> scale) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_config(ss.str(), scale);
}

std::string scenario_config_to_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["power"] = c.power == Power::high ? "high" : "low";
  j["spec"] = nlohmann::ordered_json::parse(experiment_spec_to_json(c.spec));
  j["updates"] = c.updates;
  j["assignments_per_update"] = c.assignments_per_update;
  j["repetitions"] = c.repetitions;
  j["seed"] = c.seed;
  j["interaction_effect"] = {{"mean", c.interaction_effect.mean}, {"sd", c.interaction_effect.sd}};
  j["h1_fraction"] = c.h1_fraction;
  j["h0_mode"] = c.h0_mode == H0Mode::combined ? "combined" : "separate";
  j["interaction_order"] = c.interaction_order;
  std::vector<std::string> methods;
  for (auto m : c.methods) methods.push_back(method_name(m));
  j["methods"] = methods;
  std::vector<std::string> taus;
  for (const auto& t : c.tau_specs) {
    std::ostringstream os;
    os.precision(17);
    if (t.kind == TauKind::dynamic)
      os << "dynamic";
    else
      os << t.kind_name() << ':' << t.value;
    taus.push_back(os.str());
  }
  if (c.learn_tau) taus.emplace_back("learnt");
  j["tau"] = taus;
  j["alpha"] = c.alpha;
  j["sampler"] = {{"chains", c.fit.sampler.chains},
                  {"warmup", c.fit.sampler.warmup_draws},
                  {"kept", c.fit.sampler.kept_draws},
                  {"target_accept", c.fit.sampler.target_accept},
                  {"max_tree_depth", c.fit.sampler.max_tree_depth}};
  j["hyper"] = {{"mu_prior_mean", c.fit.hyper.mu_prior_mean},
                {"mu_prior_sd", c.fit.hyper.mu_prior_sd},
                {"sigma_cauchy_scale", c.fit.hyper.sigma_cauchy_scale}};
  j["parameterization"] =
      c.fit.parameterization == Parameterization::noncentered ? "noncentered" : "centered";
  j["metaprior"] = {{"method", method_name(c.metaprior_method)},
                    {"cauchy_scale", c.metaprior.cauchy_scale},
                    {"floor", c.metaprior.floor}};
  return j.dump(2);
}

GroundTruth generate_truth(const ScenarioConfig& config, std::uint64_t rep_seed, Arm arm) {
  const ExperimentSpec& spec = config.spec;
  const DesignMatrix X = build_design_matrix(spec, 2);
  const std::size_t cells = spec.num_cells();

  GroundTruth truth;
  truth.h1_cell.resize(cells);
  for (std::size_t k = 0; k < cells; ++k)
    truth.h1_cell[k] = arm == Arm::h1 ||
                       (arm == Arm::combined && config.is_h1_context(spec.context_of(k)));

  Rng rng = make_stream(rep_seed, {arm_id(arm), 0});
  std::normal_distribution<double> effect(config.interaction_effect.mean,
                                          config.interaction_effect.sd);
  truth.true_beta = Eigen::VectorXd::Zero(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    // One draw per column keeps the stream independent of the mask.
    const double b = config.interaction_effect.sd > 0.0 ? effect(rng)
                                                        : config.interaction_effect.mean;
    if (X.column_labels[static_cast<std::size_t>(j)].kind != ColumnKind::interaction) continue;
    bool touches_h0 = false;
    for (std::size_t k = 0; k < cells && !touches_h0; ++k)
      touches_h0 = !truth.h1_cell[k] && X.entries(static_cast<Eigen::Index>(k), j) != 0.0;
    if (!touches_h0) truth.true_beta[j] = b;
  }

  const Eigen::VectorXd eta = X.entries * truth.true_beta;
  truth.true_rates = eta.unaryExpr([](double x) { return sigmoid(x); });
  return truth;
}

std::vector<CountData> stream_updates(const GroundTruth& truth, const ScenarioConfig& config,
                                      std::uint64_t rep_seed) {
  const auto cells = static_cast<std::size_t>(truth.true_rates.size());
  // The arm is folded into rep_seed by the caller.
  Rng rng = make_stream(rep_seed, {1});
  const std::int64_t base = config.assignments_per_update / static_cast<std::int64_t>(cells);
  const std::int64_t remainder = config.assignments_per_update % static_cast<std::int64_t>(cells);

  std::vector<CountData> out(static_cast<std::size_t>(std::max(config.updates, 0)));
  for (auto& update : out) {
    update.assignments.resize(cells);
    update.responses.resize(cells);
    for (std::size_t k = 0; k < cells; ++k) {
      const std::int64_t a = base + (static_cast<std::int64_t>(k) < remainder ? 1 : 0);
      std::binomial_distribution<std::int64_t> binom(a, truth.true_rates[static_cast<Eigen::Index>(k)]);
      update.assignments[k] = a;
      update.responses[k] = binom(rng);
    }
  }
  return out;
}

bool is_h1_pair(const GroundTruth& truth, const ExperimentSpec& spec, const Comparison& pair) {
  return truth.h1_cell[spec.cell_index(pair.content_a, pair.context_combo)] &&
         truth.h1_cell[spec.cell_index(pair.content_b, pair.context_combo)];
}

const MethodTrace& RepetitionResult::trace(Method m) const {
  for (const auto& t : methods)
    if (t.method == m) return t;
  throw ConfigError("repetition has no trace for method " + method_name(m));
}

RepetitionResult run_repetition(const GroundTruth& truth, const ScenarioConfig& config,
                                int repetition, Arm arm, const std::vector<TauSpec>& tau_specs) {
  const std::uint64_t rep_seed = repetition_seed(config, repetition);
  const std::uint64_t arm_seed = derive_seed(rep_seed, {arm_id(arm)});
  const DesignMatrix X = build_design_matrix(config.spec, config.interaction_order);
  const auto stream = stream_updates(truth, config, arm_seed);

  RepetitionResult out;
  out.repetition = repetition;
  out.arm = arm;
  out.truth = truth;
  out.tau_specs = tau_specs;
  for (auto m : config.methods) {
    MethodTrace t;
    t.method = m;
    t.comparisons.resize(tau_specs.size());
    out.methods.push_back(std::move(t));
  }

  CountData cumulative;
  for (std::size_t u = 0; u < stream.size(); ++u) {
    cumulative += stream[u];
    for (auto& trace : out.methods) {
      std::vector<CellEstimate> estimates;
      if (trace.method == Method::mle) {
        estimates = mle_estimates(cumulative);
      } else {
        HierarchicalFit fit = config.fit;
        fit.sampler.seed = derive_seed(arm_seed, {2, static_cast<std::uint64_t>(u)});
        fit.sampler.execution = config.execution;
        const PosteriorSamples samples = fit_hierarchical(X, cumulative, fit);
        out.divergences += samples.diagnostics.divergence_count;
        if (samples.diagnostics.divergence_warning)
          out.warnings.push_back("repetition " + std::to_string(repetition) + " update " +
                                 std::to_string(u + 1) + ": more than 10% divergent transitions");
        estimates = hb_estimate(samples, X, config.execution);
      }
      Eigen::VectorXd means(static_cast<Eigen::Index>(estimates.size()));
      Eigen::VectorXd vars(means.size());
      for (std::size_t k = 0; k < estimates.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        means[i] = estimates[k].defined ? estimates[k].mean : std::nan("");
        vars[i] = estimates[k].defined ? estimates[k].variance : std::nan("");
      }
      trace.means.push_back(std::move(means));
      trace.variances.push_back(std::move(vars));
      for (std::size_t t = 0; t < tau_specs.size(); ++t) {
        static const std::vector<ComparisonResult> kEmpty;
        const auto& prior = u == 0 ? kEmpty : trace.comparisons[t].back();
        trace.comparisons[t].push_back(run_all_comparisons(estimates, config.spec, tau_specs[t],
                                                           config.alpha, prior,
                                                           config.execution));
      }
    }
  }
  return out;
}

double MetricsReport::get(int update, const std::string& method, const std::string& tau_kind,
                          const std::string& metric) const {
  for (const auto& r : rows)
    if (r.update == update && r.method == method && r.tau_kind == tau_kind && r.metric == metric)
      return r.value;
  throw ConfigError("no metric " + metric + " for " + method + "/" + tau_kind + " at update " +
                    std::to_string(update));
}

MetricsAccumulator::MetricsAccumulator(ScenarioConfig config) : config_(std::move(config)) {}

void MetricsAccumulator::add(const RepetitionResult& rep, bool score_decisions) {
  const auto& spec = config_.spec;
  const auto pairs = enumerate_comparisons(spec);
  std::vector<bool> h1_pair(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) h1_pair[i] = is_h1_pair(rep.truth, spec, pairs[i]);

  for (const auto& trace : rep.methods) {
    const std::string method = method_name(trace.method);
    for (std::size_t u = 0; u < trace.means.size(); ++u) {
      const int update = static_cast<int>(u) + 1;
      auto& err = errors_[{rep.repetition, method, update}];
      std::vector<double> h0_values;
      for (Eigen::Index k = 0; k < trace.means[u].size(); ++k) {
        const double e = trace.means[u][k];
        if (std::isnan(e)) continue;
        const double d = e - rep.truth.true_rates[k];
        err.sse += d * d;
        err.n += 1.0;
        if (rep.truth.h1_cell[static_cast<std::size_t>(k)]) {
          err.sse_h1 += d * d;
          err.n_h1 += 1.0;
        } else {
          err.sse_h0 += d * d;
          err.n_h0 += 1.0;
          h0_values.push_back(e);
        }
      }
      if (h0_values.size() > 1) {
        double mean = 0.0;
        for (double v : h0_values) mean += v;
        mean /= static_cast<double>(h0_values.size());
        double ss = 0.0;
        for (double v : h0_values) ss += (v - mean) * (v - mean);
        h0_spread_[{rep.repetition, method, update}] =
            ss / static_cast<double>(h0_values.size() - 1);
      }
    }
    if (!score_decisions) continue;
    for (std::size_t t = 0; t < rep.tau_specs.size(); ++t) {
      const std::string tau = rep.tau_specs[t].kind_name();
      for (std::size_t u = 0; u < trace.comparisons[t].size(); ++u) {
        auto& counts = decisions_[{rep.repetition, method, tau, static_cast<int>(u) + 1}];
        const auto& results = trace.comparisons[t][u];
        for (std::size_t i = 0; i < results.size(); ++i) {
          if (h1_pair[i]) {
            counts.h1_pairs += 1.0;
            if (results[i].significant) counts.true_positives += 1.0;
          } else {
            counts.h0_pairs += 1.0;
            if (results[i].significant) counts.false_positives += 1.0;
          }
        }
      }
    }
  }
}

MetricsReport MetricsAccumulator::finalize() const {
  // (update, method, tau, metric) -> (sum over reps, count)
  std::map<std::tuple<int, std::string, std::string, std::string>, std::pair<double, int>> agg;
  auto add = [&agg](int u, const std::string& m, const std::string& t, const std::string& metric,
                    double v) {
    auto& a = agg[{u, m, t, metric}];
    a.first += v;
    a.second += 1;
  };
  std::set<int> reps;
  for (const auto& [key, e] : errors_) {
    const auto& [rep, method, update] = key;
    reps.insert(rep);
    if (e.n > 0) add(update, method, "none", "rmse", std::sqrt(e.sse / e.n));
    if (e.n_h1 > 0) add(update, method, "none", "rmse_h1", std::sqrt(e.sse_h1 / e.n_h1));
    if (e.n_h0 > 0) add(update, method, "none", "rmse_h0", std::sqrt(e.sse_h0 / e.n_h0));
  }
  for (const auto& [key, v] : h0_spread_) {
    const auto& [rep, method, update] = key;
    add(update, method, "none", "h0_spread", v);
  }
  std::set<int> decision_reps;
  for (const auto& [key, c] : decisions_) {
    const auto& [rep, method, tau, update] = key;
    decision_reps.insert(rep);
    if (c.h1_pairs > 0) add(update, method, tau, "fnr", 1.0 - c.true_positives / c.h1_pairs);
    if (c.h0_pairs > 0) add(update, method, tau, "fpr", c.false_positives / c.h0_pairs);
    const double declared = c.true_positives + c.false_positives;
    add(update, method, tau, "fdr", declared > 0 ? c.false_positives / declared : 0.0);
  }

  MetricsReport report;
  report.repetitions_scored = static_cast<int>(decision_reps.empty() ? reps.size()
                                                                     : decision_reps.size());
  for (const auto& [key, a] : agg) {
    const auto& [update, method, tau, metric] = key;
    report.rows.push_back({update, method, tau, metric, a.first / a.second});
  }
  const int final_update = config_.updates;
  for (const auto& [key, e] : errors_) {
    const auto& [rep, method, update] = key;
    if (update == final_update && e.n > 0)
      report.final_rmse_by_rep[method].push_back(std::sqrt(e.sse / e.n));
  }
  for (const auto& [key, v] : h0_spread_) {
    const auto& [rep, method, update] = key;
    if (update == final_update) report.final_h0_spread_by_rep[method].push_back(v);
  }
  return report;
}

MetricsReport score(const std::vector<RepetitionResult>& repetitions,
                    const ScenarioConfig& config) {
  MetricsAccumulator acc(config);
  for (const auto& r : repetitions) acc.add(r);
  return acc.finalize();
}

namespace {

struct Job {
  int repetition;
  Arm arm;
};

// Runs jobs in parallel batches and hands results to `consume` in job order.
void run_jobs(const ScenarioConfig& config, const std::vector<Job>& jobs,
              const std::vector<TauSpec>& taus,
              const std::function<void(RepetitionResult&&)>& consume) {
  const std::size_t batch =
      config.execution == Execution::parallel ? static_cast<std::size_t>(std::max(1, worker_count()))
                                              : 1;
  for (std::size_t start = 0; start < jobs.size(); start += batch) {
    const std::size_t n = std::min(batch, jobs.size() - start);
    std::vector<RepetitionResult> results(n);
    for_each_index(config.execution, n, [&](std::size_t i) {
      const Job& job = jobs[start + i];
      const auto truth =
          generate_truth(config, repetition_seed(config, job.repetition), job.arm);
      results[i] = run_repetition(truth, config, job.repetition, job.arm, taus);
    });
    for (auto& r : results) consume(std::move(r));
  }
}

std::vector<Job> jobs_for(const ScenarioConfig& config, const std::vector<std::size_t>& reps) {
  std::vector<Job> jobs;
  for (auto r : reps)
    for (auto arm : arms_for(config)) jobs.push_back({static_cast<int>(r), arm});
  return jobs;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config, const RepetitionSink& sink) {
  config.validate();
  ScenarioResult result;
  MetricsAccumulator acc(config);

  std::vector<std::size_t> all(static_cast<std::size_t>(config.repetitions));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  auto collect_warnings = [&result](const RepetitionResult& r) {
    result.warnings.insert(result.warnings.end(), r.warnings.begin(), r.warnings.end());
  };

  if (!config.learn_tau) {
    result.tau_specs = config.tau_specs;
    run_jobs(config, jobs_for(config, all), result.tau_specs, [&](RepetitionResult&& r) {
      acc.add(r);
      collect_warnings(r);
      if (sink) sink(r);
    });
    result.report = acc.finalize();
    return result;
  }

  const Split split = split_halves(all.size());
  // Differences do not depend on tau, so any tau works for the training runs.
  std::vector<TauSpec> train_taus = config.tau_specs;
  if (train_taus.empty()) train_taus.push_back(TauSpec::fixed(0.1));
  std::vector<std::vector<ComparisonResult>> corpus;
  run_jobs(config, jobs_for(config, split.train), train_taus, [&](RepetitionResult&& r) {
    acc.add(r, false);
    collect_warnings(r);
    const auto& trace = r.trace(config.metaprior_method);
    if (!trace.comparisons.empty() && !trace.comparisons[0].empty())
      corpus.push_back(trace.comparisons[0].back());
    if (sink) sink(r);
  });

  const auto effects = collect_effects(corpus);
  SamplerConfig tau_sampler = config.metaprior_sampler;
  tau_sampler.seed = derive_seed(config.seed, {0x7a75ULL});
  tau_sampler.execution = config.execution;
  LearntTau learnt = learn_tau(effects, tau_sampler, config.metaprior);
  result.warnings.insert(result.warnings.end(), learnt.warnings.begin(), learnt.warnings.end());

  result.tau_specs = config.tau_specs;
  result.tau_specs.push_back(TauSpec::learnt(learnt.point_value));
  result.learnt_tau = std::move(learnt);
  run_jobs(config, jobs_for(config, split.test), result.tau_specs, [&](RepetitionResult&& r) {
    acc.add(r);
    collect_warnings(r);
    if (sink) sink(r);
  });
  result.report = acc.finalize();
  return result;
}

ScenarioResult tau_experiment(ScenarioConfig config) {
  config.tau_specs = {TauSpec::fixed(0.1), TauSpec::dynamic()};
  config.learn_tau = true;
  return run_scenario(config);
}

std::vector<double> naive_sequential_fpr(const NaiveTestConfig& config) {
  if (config.repetitions < 1 || config.updates < 1 || config.assignments_per_arm_per_update < 1)
    throw ConfigError("naive test needs positive repetitions, updates and traffic");
  // Two-sided critical value of the standard normal at alpha.
  const double z_crit = [&] {
    double lo = 0.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (std::erfc(mid / std::sqrt(2.0)) > config.alpha ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }();

  std::vector<int> first_hit(static_cast<std::size_t>(config.repetitions), 0);
  for_each_index(config.execution, first_hit.size(), [&](std::size_t rep) {
    Rng rng = make_stream(config.seed, {static_cast<std::uint64_t>(rep)});
    std::binomial_distribution<std::int64_t> binom(config.assignments_per_arm_per_update,
                                                   config.rate);
    double n = 0.0, ra = 0.0, rb = 0.0;
    for (int u = 1; u <= config.updates; ++u) {
      n += static_cast<double>(config.assignments_per_arm_per_update);
      ra += static_cast<double>(binom(rng));
      rb += static_cast<double>(binom(rng));
      const double pooled = (ra + rb) / (2.0 * n);
      const double se = std::sqrt(pooled * (1.0 - pooled) * (2.0 / n));
      if (se > 0.0 && std::abs(ra / n - rb / n) / se > z_crit) {
        first_hit[rep] = u;
        break;
      }
    }
  });

  std::vector<double> fpr(static_cast<std::size_t>(config.updates), 0.0);
  for (int hit : first_hit)
    if (hit > 0)
      for (int u = hit; u <= config.updates; ++u) fpr[static_cast<std::size_t>(u - 1)] += 1.0;
  for (auto& v : fpr) v /= static_cast<double>(config.repetitions);
  return fpr;
}

}  // namespace hbab::sim
