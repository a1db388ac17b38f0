// Command-line entry points: simulate, analyze, learn-tau, oracle-check.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hbab/design.hpp"
#include "hbab/estimate.hpp"
#include "hbab/metaprior.hpp"
#include "hbab/parallel.hpp"
#include "hbab/random.hpp"
#include "hbab/seqtest.hpp"
#include "hbab/sim.hpp"
#include "io.hpp"
#include "oracle_battery.hpp"

namespace fs = std::filesystem;
using namespace hbab;
using io::num;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kInputError = 2;
constexpr int kRuntimeError = 3;

constexpr const char* kVersion = "1.0.0";

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

class Manifest {
 public:
  Manifest(std::string command, fs::path dir) : dir_(std::move(dir)) {
    j_["command"] = std::move(command);
    j_["version"] = kVersion;
    j_["started"] = timestamp();
    j_["workers"] = worker_count();
    j_["openmp"] = openmp_enabled();
    j_["outputs"] = nlohmann::ordered_json::array();
    j_["warnings"] = nlohmann::ordered_json::array();
  }
  nlohmann::ordered_json& operator[](const char* key) { return j_[key]; }
  void output(const fs::path& p) { j_["outputs"].push_back(p.filename().string()); }
  void warn(const std::string& w) { j_["warnings"].push_back(w); }
  void write() {
    j_["finished"] = timestamp();
    const fs::path path = dir_ / "manifest.json";
    j_["outputs"].push_back(path.filename().string());
    io::write_file(path, j_.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  nlohmann::ordered_json j_;
};

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw io::InputError("cannot create output directory '" + dir.string() + "'");
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string scale;
  std::uint64_t seed = 0;
  std::string out;
  bool serial = false;
};

int cmd_simulate(const SimulateArgs& a) {
  std::optional<sim::Scale> scale;
  if (a.scale == "paper") scale = sim::Scale::paper;
  if (a.scale == "desk") scale = sim::Scale::desk;
  sim::ScenarioConfig config = sim::load_scenario_config(a.config, scale);
  config.seed = a.seed;
  if (a.serial) config.execution = Execution::serial;
  const fs::path dir(a.out);
  prepare_dir(dir);

  Manifest manifest("simulate", dir);
  const std::string config_json = sim::scenario_config_to_json(config);
  manifest["config_path"] = a.config;
  manifest["config_hash"] = io::hex(io::fnv1a(config_json));
  manifest["seed"] = a.seed;
  manifest["config"] = nlohmann::ordered_json::parse(config_json);

  const auto& spec = config.spec;
  const auto pairs = enumerate_comparisons(spec);
  io::AtomicFile decisions(dir / "decisions.csv");
  io::AtomicFile estimates(dir / "estimates.csv");
  io::AtomicFile truth(dir / "truth.csv");
  decisions.stream() << "repetition,arm,method,tau_kind,update,context,content_a,content_b,h1,"
                        "diff_mean,diff_var,tau,bayes_factor,p_instant,p_min,significant\n";
  estimates.stream() << "repetition,arm,method,update,cell,content,context,mean,variance\n";
  truth.stream() << "repetition,arm,cell,content,context,h1,true_rate\n";

  std::vector<std::string> content_names, context_names;
  for (std::size_t m = 0; m < spec.num_content_combos(); ++m) content_names.push_back(content_label(spec, m));
  for (std::size_t c = 0; c < spec.num_context_combos(); ++c) context_names.push_back(context_label(spec, c));

  auto sink = [&](const sim::RepetitionResult& r) {
    const std::string prefix = std::to_string(r.repetition) + "," + sim::arm_name(r.arm) + ",";
    for (std::size_t k = 0; k < spec.num_cells(); ++k)
      truth.stream() << prefix << k << ',' << content_names[spec.content_of(k)] << ','
                     << context_names[spec.context_of(k)] << ',' << int(r.truth.h1_cell[k]) << ','
                     << num(r.truth.true_rates[static_cast<Eigen::Index>(k)]) << '\n';
    for (const auto& t : r.methods) {
      const std::string method = sim::method_name(t.method);
      for (std::size_t u = 0; u < t.means.size(); ++u)
        for (std::size_t k = 0; k < spec.num_cells(); ++k) {
          const auto i = static_cast<Eigen::Index>(k);
          estimates.stream() << prefix << method << ',' << u + 1 << ',' << k << ','
                             << content_names[spec.content_of(k)] << ','
                             << context_names[spec.context_of(k)] << ',' << num(t.means[u][i]) << ','
                             << num(t.variances[u][i]) << '\n';
        }
      for (std::size_t ti = 0; ti < r.tau_specs.size(); ++ti)
        for (std::size_t u = 0; u < t.comparisons[ti].size(); ++u)
          for (std::size_t p = 0; p < pairs.size(); ++p) {
            const auto& c = t.comparisons[ti][u][p];
            decisions.stream() << prefix << method << ',' << r.tau_specs[ti].kind_name() << ','
                               << u + 1 << ',' << context_names[c.pair.context_combo] << ','
                               << content_names[c.pair.content_a] << ','
                               << content_names[c.pair.content_b] << ','
                               << int(sim::is_h1_pair(r.truth, spec, c.pair)) << ','
                               << num(c.diff_mean) << ',' << num(c.diff_var) << ',' << num(c.tau)
                               << ',' << num(c.bayes_factor) << ',' << num(c.p_instant) << ','
                               << num(c.p_min) << ',' << int(c.significant) << '\n';
          }
    }
  };

  const sim::ScenarioResult result = sim::run_scenario(config, sink);

  io::AtomicFile metrics(dir / "metrics.csv");
  metrics.stream() << "update,method,tau_kind,metric,value\n";
  for (const auto& row : result.report.rows)
    metrics.stream() << row.update << ',' << row.method << ',' << row.tau_kind << ',' << row.metric
                     << ',' << num(row.value) << '\n';

  for (auto* f : {&metrics, &decisions, &estimates, &truth}) {
    f->commit();
    manifest.output(f->path());
  }
  if (result.learnt_tau) {
    const auto& t = *result.learnt_tau;
    nlohmann::ordered_json j;
    j["posterior_mean"] = t.posterior_mean;
    j["q025"] = t.q025;
    j["q50"] = t.q50;
    j["q95"] = t.q95;
    j["q975"] = t.q975;
    j["point_value"] = t.point_value;
    j["floored"] = t.floored;
    j["corpus_size"] = t.corpus_size;
    io::write_file(dir / "learnt_tau.json", j.dump(2) + "\n");
    manifest.output(dir / "learnt_tau.json");
  }
  for (const auto& w : result.warnings) {
    manifest.warn(w);
    std::cerr << "warning: " << w << '\n';
  }
  manifest["repetitions_scored"] = result.report.repetitions_scored;
  manifest.write();
  return kOk;
}

// ----------------------------------------------------------------- analyze

struct CountStream {
  std::vector<CountData> updates;  // per-update (not cumulative)
};

// Counts CSV: update,<factor names...>,assignments,responses
CountStream read_counts(const std::string& path, const ExperimentSpec& spec) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw io::InputError("counts file is empty");
  const auto header = io::split(line);
  const std::size_t F = spec.num_factors();
  if (header.size() != F + 3 || header.front() != "update" || header[F + 1] != "assignments" ||
      header[F + 2] != "responses")
    throw io::InputError("counts header must be: update,<" + std::to_string(F) +
                         " factor names>,assignments,responses");
  std::vector<std::size_t> factor_of_column(F);
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < F; ++i) {
    const std::size_t f = spec.find_factor(header[i + 1]);
    if (f == spec.num_factors()) throw io::InputError("counts header names unknown factor '" + header[i + 1] + "'");
    if (!seen.insert(f).second) throw io::InputError("counts header repeats factor '" + header[i + 1] + "'");
    factor_of_column[i] = f;
  }

  auto parse_int = [](const std::string& s, std::size_t row, const char* what) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used != s.size() || v < 0) throw std::invalid_argument(what);
      return static_cast<std::int64_t>(v);
    } catch (const std::exception&) {
      throw io::InputError("row " + std::to_string(row) + ": invalid " + what + " '" + s + "'");
    }
  };

  std::map<std::int64_t, CountData> by_update;
  std::set<std::pair<std::int64_t, std::size_t>> filled;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = io::split(line);
    if (fields.size() != header.size())
      throw io::InputError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) + " fields");
    const std::int64_t u = parse_int(fields[0], row, "update");
    Cell cell;
    cell.value_index.assign(F, -1);
    for (std::size_t i = 0; i < F; ++i) {
      const auto& values = spec.factor(factor_of_column[i]).values;
      const auto it = std::find(values.begin(), values.end(), fields[i + 1]);
      if (it == values.end())
        throw io::InputError("row " + std::to_string(row) + ": unknown value '" + fields[i + 1] +
                             "' for factor '" + header[i + 1] + "'");
      cell.value_index[factor_of_column[i]] = static_cast<int>(it - values.begin());
    }
    const std::size_t k = index_of(spec, cell);
    const std::int64_t a = parse_int(fields[F + 1], row, "assignments");
    const std::int64_t r = parse_int(fields[F + 2], row, "responses");
    if (r > a) throw io::InputError("row " + std::to_string(row) + ": responses exceed assignments");
    if (!filled.insert({u, k}).second)
      throw io::InputError("row " + std::to_string(row) + ": duplicate cell for update " + std::to_string(u));
    auto& d = by_update[u];
    if (d.size() == 0) {
      d.assignments.assign(spec.num_cells(), 0);
      d.responses.assign(spec.num_cells(), 0);
    }
    d.assignments[k] = a;
    d.responses[k] = r;
  }
  if (by_update.empty()) throw io::InputError("counts file has no data rows");
  CountStream s;
  std::int64_t expected = 1;
  for (auto& [u, d] : by_update) {
    if (u != expected) throw io::InputError("updates must be contiguous from 1; missing update " + std::to_string(expected));
    s.updates.push_back(std::move(d));
    ++expected;
  }
  return s;
}

double read_learnt_tau_file(const std::string& path) {
  try {
    const auto j = nlohmann::json::parse(io::read_file(path));
    return j.at("point_value").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw io::InputError("cannot read learnt tau from '" + path + "': " + e.what());
  }
}

// "learnt:<file>" reads a learn-tau result; everything else goes to parse_tau_spec.
TauSpec cli_tau(const std::string& text) {
  const std::string prefix = "learnt:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string rest = text.substr(prefix.size());
    if (fs::exists(rest)) {
      TauSpec t = TauSpec::learnt(read_learnt_tau_file(rest));
      t.validate();
      return t;
    }
  }
  return parse_tau_spec(text);
}

void write_comparisons(std::ostream& out, std::size_t update, const std::vector<ComparisonResult>& results,
                       const std::vector<std::string>& contexts, const std::vector<std::string>& contents) {
  for (const auto& c : results)
    out << update << ',' << contexts[c.pair.context_combo] << ',' << contents[c.pair.content_a] << ','
        << contents[c.pair.content_b] << ',' << num(c.diff_mean) << ',' << num(c.diff_var) << ','
        << num(c.tau) << ',' << num(c.bayes_factor) << ',' << num(c.p_instant) << ',' << num(c.p_min)
        << ',' << int(c.significant) << ',' << int(c.degenerate) << '\n';
}

struct AnalyzeArgs {
  std::string design;
  std::string counts;
  std::string tau = "fixed:0.1";
  double alpha = 0.05;
  std::string method = "hb";
  std::string out;
  std::uint64_t seed = 0;
  int chains = 4;
  int warmup = 500;
  int kept = 500;
  int interaction_order = 2;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const ExperimentSpec spec = load_experiment_spec(a.design);
  if (spec.num_content_combos() < 2) throw io::InputError("design needs at least 2 content combinations");
  const TauSpec tau = cli_tau(a.tau);
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw io::InputError("alpha must lie in (0, 1)");
  if (a.method != "hb" && a.method != "mle") throw io::InputError("method must be hb or mle");
  const CountStream stream = read_counts(a.counts, spec);
  const int order = spec.num_factors() < 2 ? 1 : a.interaction_order;
  const DesignMatrix X = build_design_matrix(spec, order);

  HierarchicalFit fit;
  fit.sampler.chains = a.chains;
  fit.sampler.warmup_draws = a.warmup;
  fit.sampler.kept_draws = a.kept;
  fit.sampler.validate();

  const fs::path dir(a.out);
  prepare_dir(dir);
  Manifest manifest("analyze", dir);
  manifest["design"] = a.design;
  manifest["counts"] = a.counts;
  manifest["counts_hash"] = io::hex(io::fnv1a(io::read_file(a.counts)));
  manifest["design_hash"] = io::hex(io::fnv1a(experiment_spec_to_json(spec)));
  manifest["method"] = a.method;
  manifest["tau_kind"] = tau.kind_name();
  manifest["tau_value"] = tau.value;
  manifest["alpha"] = a.alpha;
  manifest["seed"] = a.seed;
  manifest["updates"] = stream.updates.size();

  std::vector<std::string> contents, contexts;
  for (std::size_t m = 0; m < spec.num_content_combos(); ++m) contents.push_back(content_label(spec, m));
  for (std::size_t c = 0; c < spec.num_context_combos(); ++c) contexts.push_back(context_label(spec, c));

  io::AtomicFile est(dir / "estimates.csv");
  io::AtomicFile cmp(dir / "comparisons.csv");
  io::AtomicFile mest(dir / "marginal_estimates.csv");
  io::AtomicFile mcmp(dir / "marginal_comparisons.csv");
  const char* cmp_header =
      "update,context,content_a,content_b,diff_mean,diff_var,tau,bayes_factor,p_instant,p_min,"
      "significant,degenerate\n";
  est.stream() << "update,cell,content,context,assignments,responses,mean,variance,defined\n";
  cmp.stream() << cmp_header;
  mest.stream() << "update,content,mean,variance,defined\n";
  mcmp.stream() << cmp_header;

  CountData cumulative;
  std::vector<ComparisonResult> state, marginal_state;
  int divergent_updates = 0;
  for (std::size_t u = 0; u < stream.updates.size(); ++u) {
    if (u == 0)
      cumulative = stream.updates[0];
    else
      cumulative += stream.updates[u];
    std::vector<CellEstimate> estimates;
    if (a.method == "mle") {
      estimates = mle_estimates(cumulative);
    } else {
      fit.sampler.seed = derive_seed(a.seed, {static_cast<std::uint64_t>(u)});
      const auto samples = fit_hierarchical(X, cumulative, fit);
      if (samples.diagnostics.divergence_warning) ++divergent_updates;
      estimates = hb_estimate(samples, X);
    }
    for (std::size_t k = 0; k < spec.num_cells(); ++k)
      est.stream() << u + 1 << ',' << k << ',' << contents[spec.content_of(k)] << ','
                   << contexts[spec.context_of(k)] << ',' << cumulative.assignments[k] << ','
                   << cumulative.responses[k] << ',' << num(estimates[k].mean) << ','
                   << num(estimates[k].variance) << ',' << int(estimates[k].defined) << '\n';
    state = run_all_comparisons(estimates, spec, tau, a.alpha, state);
    write_comparisons(cmp.stream(), u + 1, state, contexts, contents);

    const auto traffic = context_traffic(spec, cumulative);
    double total = 0.0;
    for (double t : traffic) total += t;
    if (total > 0.0) {
      const auto marginal = marginalize(estimates, spec, traffic);
      for (std::size_t m = 0; m < marginal.size(); ++m)
        mest.stream() << u + 1 << ',' << contents[m] << ',' << num(marginal[m].mean) << ','
                      << num(marginal[m].variance) << ',' << int(marginal[m].defined) << '\n';
      marginal_state = run_marginal_comparisons(marginal, spec, tau, a.alpha, marginal_state);
      write_comparisons(mcmp.stream(), u + 1, marginal_state, {"all"}, contents);
    }
  }
  if (divergent_updates > 0)
    manifest.warn(std::to_string(divergent_updates) + " update(s) had more than 10% divergent transitions");
  for (auto* f : {&est, &cmp, &mest, &mcmp}) {
    f->commit();
    manifest.output(f->path());
  }
  manifest.write();
  return kOk;
}

// --------------------------------------------------------------- learn-tau

// effects CSV (delta,noise_sd) or a directory of comparison tables.
std::vector<EffectObservation> read_effects_file(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw io::InputError("effects file is empty");
  const auto header = io::split(line);
  if (header.size() != 2 || header[0] != "delta" || header[1] != "noise_sd")
    throw io::InputError("effects header must be: delta,noise_sd");
  std::vector<EffectObservation> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = io::split(line);
    EffectObservation e;
    try {
      if (f.size() != 2) throw std::invalid_argument("fields");
      e.delta = std::stod(f[0]);
      e.noise_sd = std::stod(f[1]);
    } catch (const std::exception&) {
      throw io::InputError("row " + std::to_string(row) + ": expected two numbers");
    }
    if (!(e.noise_sd > 0.0) || !std::isfinite(e.noise_sd) || !std::isfinite(e.delta))
      throw io::InputError("row " + std::to_string(row) + ": noise_sd must be positive and finite");
    out.push_back(e);
  }
  return out;
}

// Final-update effects from one comparison table. Rows are grouped by any of
// repetition/arm/method/tau_kind present; `method` filters, and only the
// first tau kind seen is used since differences do not depend on tau.
std::vector<std::vector<ComparisonResult>> read_comparison_table(const fs::path& path, const std::string& method) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);
  const auto header = io::split(line);
  auto col = [&](const std::string& name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_update = col("update"), c_mean = col("diff_mean"), c_var = col("diff_var");
  if (c_update < 0 || c_mean < 0 || c_var < 0)
    throw io::InputError("'" + path.string() + "' lacks update/diff_mean/diff_var columns");
  const int c_method = col("method"), c_tau = col("tau_kind"), c_degenerate = col("degenerate");
  std::vector<int> key_cols;
  for (const char* k : {"repetition", "arm", "method", "tau_kind"})
    if (col(k) >= 0) key_cols.push_back(col(k));

  std::string first_tau;
  // group -> (update, results at that update)
  std::map<std::string, std::pair<long, std::vector<ComparisonResult>>> groups;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split(line);
    if (f.size() != header.size()) throw io::InputError("'" + path.string() + "' has a malformed row");
    if (c_method >= 0 && f[static_cast<std::size_t>(c_method)] != method) continue;
    if (c_tau >= 0) {
      if (first_tau.empty()) first_tau = f[static_cast<std::size_t>(c_tau)];
      if (f[static_cast<std::size_t>(c_tau)] != first_tau) continue;
    }
    std::string key;
    for (int k : key_cols) key += f[static_cast<std::size_t>(k)] + "|";
    const long u = std::stol(f[static_cast<std::size_t>(c_update)]);
    ComparisonResult r;
    r.diff_mean = std::stod(f[static_cast<std::size_t>(c_mean)]);
    r.diff_var = std::stod(f[static_cast<std::size_t>(c_var)]);
    r.degenerate = c_degenerate >= 0 && f[static_cast<std::size_t>(c_degenerate)] == "1";
    auto& g = groups[key];
    if (u > g.first) {
      g.first = u;
      g.second.clear();
    }
    if (u == g.first) g.second.push_back(r);
  }
  std::vector<std::vector<ComparisonResult>> out;
  for (auto& [k, g] : groups) out.push_back(std::move(g.second));
  return out;
}

struct LearnArgs {
  std::string input;
  std::string out;
  std::string method = "hb";
  std::uint64_t seed = 0;
  int chains = 4;
  int warmup = 1000;
  int kept = 1000;
  double cauchy_scale = 5.0;
  double floor = 1e-8;
};

int cmd_learn_tau(const LearnArgs& a) {
  const fs::path input(a.input);
  std::vector<EffectObservation> effects;
  std::vector<std::string> sources;
  if (fs::is_directory(input)) {
    std::vector<fs::path> tables;
    for (const auto& e : fs::recursive_directory_iterator(input))
      if (e.is_regular_file() && (e.path().filename() == "comparisons.csv" || e.path().filename() == "decisions.csv"))
        tables.push_back(e.path());
    std::sort(tables.begin(), tables.end());
    if (tables.empty()) throw io::InputError("no comparisons.csv or decisions.csv under '" + input.string() + "'");
    for (const auto& t : tables) {
      const auto found = collect_effects(read_comparison_table(t, a.method));
      effects.insert(effects.end(), found.begin(), found.end());
      sources.push_back(t.string());
    }
  } else {
    effects = read_effects_file(input);
    sources.push_back(input.string());
  }
  if (effects.size() < 2)
    throw io::InputError("need at least 2 effects to learn tau, found " + std::to_string(effects.size()));

  SamplerConfig cfg;
  cfg.seed = a.seed;
  cfg.chains = a.chains;
  cfg.warmup_draws = a.warmup;
  cfg.kept_draws = a.kept;
  MetapriorOptions opts;
  opts.cauchy_scale = a.cauchy_scale;
  opts.floor = a.floor;
  const LearntTau t = learn_tau(effects, cfg, opts);

  const fs::path dir(a.out);
  prepare_dir(dir);
  Manifest manifest("learn-tau", dir);
  manifest["inputs"] = sources;
  manifest["seed"] = a.seed;
  nlohmann::ordered_json j;
  j["posterior_mean"] = t.posterior_mean;
  j["q025"] = t.q025;
  j["q50"] = t.q50;
  j["q95"] = t.q95;
  j["q975"] = t.q975;
  j["point_value"] = t.point_value;
  j["floored"] = t.floored;
  j["corpus_size"] = t.corpus_size;
  j["warnings"] = t.warnings;
  io::write_file(dir / "learnt_tau.json", j.dump(2) + "\n");
  manifest.output(dir / "learnt_tau.json");
  for (const auto& w : t.warnings) {
    manifest.warn(w);
    std::cerr << "warning: " << w << '\n';
  }
  manifest.write();
  std::cout << "learnt tau point value " << num(t.point_value) << " from " << t.corpus_size << " effects\n";
  return kOk;
}

// ------------------------------------------------------------ oracle-check

struct OracleArgs {
  std::string out;
  bool mutate = false;
  std::uint64_t seed = 2026;
};

int cmd_oracle_check(const OracleArgs& a) {
  oracle::BatteryOptions o;
  o.seed = a.seed;
  if (a.mutate) o.closed_form = oracle::mutated_posterior;
  const auto results = oracle::run_battery(o);

  const fs::path dir(a.out);
  prepare_dir(dir);
  Manifest manifest("oracle-check", dir);
  manifest["seed"] = a.seed;
  manifest["mutated"] = a.mutate;
  io::AtomicFile report(dir / "oracle_report.csv");
  report.stream() << "check,tolerance,observed,limit,passed,detail\n";
  bool all = true;
  for (const auto& r : results) {
    report.stream() << r.name << ",\"" << r.tolerance << "\"," << num(r.observed) << ',' << num(r.limit) << ','
                    << int(r.passed) << ",\"" << r.detail << "\"\n";
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": observed " << r.observed << " (" << r.tolerance
              << ")\n";
    all = all && r.passed;
  }
  report.commit();
  manifest.output(report.path());
  manifest["all_passed"] = all;
  manifest.write();
  return all ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  configure_workers_from_env();
  CLI::App app{"Hierarchical Bayesian estimation and sequential testing for multivariate AB tests"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Run the simulation harness");
  simulate->add_option("config", sa.config, "Scenario config (JSON)")->required();
  simulate->add_option("--scale", sa.scale, "paper or desk; overrides the config")
      ->check(CLI::IsMember({"paper", "desk"}));
  simulate->add_option("--seed", sa.seed, "Master seed")->required();
  simulate->add_option("--out", sa.out, "Output directory")->required();
  simulate->add_flag("--serial", sa.serial, "Use the serial reference path");

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Analyze an external count stream");
  analyze->add_option("design", aa.design, "Experiment spec (JSON)")->required();
  analyze->add_option("counts", aa.counts, "Counts CSV")->required();
  analyze->add_option("--tau", aa.tau, "fixed:V, dynamic, learnt:V or learnt:<learnt_tau.json>");
  analyze->add_option("--alpha", aa.alpha, "Significance level");
  analyze->add_option("--method", aa.method, "hb or mle");
  analyze->add_option("--out", aa.out, "Output directory")->required();
  analyze->add_option("--seed", aa.seed, "Sampler seed");
  analyze->add_option("--chains", aa.chains);
  analyze->add_option("--warmup", aa.warmup);
  analyze->add_option("--kept", aa.kept);
  analyze->add_option("--interaction-order", aa.interaction_order)->check(CLI::IsMember({1, 2}));

  LearnArgs la;
  auto* learn = app.add_subcommand("learn-tau", "Learn the effect-size dispersion tau");
  learn->add_option("input", la.input, "Effects CSV (delta,noise_sd) or a results directory")->required();
  learn->add_option("--out", la.out, "Output directory")->required();
  learn->add_option("--method", la.method, "Estimator whose effects are used from result tables");
  learn->add_option("--seed", la.seed, "Sampler seed");
  learn->add_option("--chains", la.chains);
  learn->add_option("--warmup", la.warmup);
  learn->add_option("--kept", la.kept);
  learn->add_option("--cauchy-scale", la.cauchy_scale);
  learn->add_option("--floor", la.floor);

  OracleArgs oa;
  auto* check = app.add_subcommand("oracle-check", "Run the conjugate-oracle battery");
  check->add_option("--out", oa.out, "Output directory")->required();
  check->add_flag("--mutate", oa.mutate, "Corrupt the closed form (negative control)");
  check->add_option("--seed", oa.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*simulate) return cmd_simulate(sa);
    if (*analyze) return cmd_analyze(aa);
    if (*learn) return cmd_learn_tau(la);
    if (*check) return cmd_oracle_check(oa);
  } catch (const sim::ConfigError& e) {
    std::cerr << "error: invalid config: " << e.what() << '\n';
    return kInputError;
  } catch (const DesignError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const io::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const TestError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const MetapriorError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const SamplerError& e) {
    std::cerr << "error: sampler failure: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
