#ifndef HBAB_SIM_HPP
#define HBAB_SIM_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "hbab/design.hpp"
#include "hbab/estimate.hpp"
#include "hbab/glm.hpp"
#include "hbab/metaprior.hpp"
#include "hbab/sampler.hpp"
#include "hbab/seqtest.hpp"

namespace hbab::sim {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Power { high, low };
enum class Scale { paper, desk };
// combined: H1 and H0 cells live in the same experiment, split by the value of
// the first context factor. separate: every repetition runs an all-H1 arm and
// an all-H0 arm.
enum class H0Mode { combined, separate };
enum class Method { hierarchical, mle };

std::string method_name(Method m);

struct EffectDistribution {
  double mean = 0.2;
  double sd = 0.2;
};

struct ScenarioConfig {
  Power power = Power::low;
  ExperimentSpec spec = uniform_spec(2, 2, 4);
  int updates = 30;
  std::int64_t assignments_per_update = 2500;
  int repetitions = 80;
  std::uint64_t seed = 0;
  EffectDistribution interaction_effect{0.2, 0.2};
  double h1_fraction = 0.5;
  H0Mode h0_mode = H0Mode::combined;
  int interaction_order = 2;

  std::vector<Method> methods{Method::hierarchical, Method::mle};
  std::vector<TauSpec> tau_specs{TauSpec::fixed(0.1)};
  // Learn tau from the training half of the repetitions and score every tau
  // kind on the testing half.
  bool learn_tau = false;
  Method metaprior_method = Method::hierarchical;
  double alpha = 0.05;

  HierarchicalFit fit;
  MetapriorOptions metaprior;
  SamplerConfig metaprior_sampler;

  Execution execution = Execution::parallel;

  void validate() const;
  // Values of the first context factor whose cells carry effects (combined mode).
  std::size_t h1_context_values() const;
  bool is_h1_context(std::size_t context_combo) const;

  // Paper-scale scenario: 2 content + 2 context factors with 4 values, 30
  // updates, 80 repetitions.
  static ScenarioConfig paper(Power power);
  // Desk-scale scenario: 2 values per factor, 10 updates, 8 repetitions, and
  // per-cell traffic matching the paper-scale scenario.
  static ScenarioConfig desk(Power power);
};

// Scenario config file (JSON). Missing keys fall back to the defaults of the
// chosen scale; `scale` overrides the file's own "scale" key.
ScenarioConfig parse_scenario_config(const std::string& json_text,
                                     std::optional<Scale> scale = std::nullopt);
ScenarioConfig load_scenario_config(const std::string& path,
                                    std::optional<Scale> scale = std::nullopt);
// Stable JSON rendering used for the config hash.
std::string scenario_config_to_json(const ScenarioConfig& config);

// Main effects are zero. An interaction coefficient is drawn when its column
// touches no H0 cell and is zero otherwise, so H0 cells share the rate 0.5
// while the truth stays exactly representable by the design.
struct GroundTruth {
  Eigen::VectorXd true_beta;
  Eigen::VectorXd true_rates;
  std::vector<bool> h1_cell;
};

enum class Arm { combined, h1, h0 };
std::string arm_name(Arm a);
std::vector<Arm> arms_for(const ScenarioConfig& config);

GroundTruth generate_truth(const ScenarioConfig& config, std::uint64_t rep_seed,
                           Arm arm = Arm::combined);

// Per-update (not cumulative) counts.
std::vector<CountData> stream_updates(const GroundTruth& truth, const ScenarioConfig& config,
                                      std::uint64_t rep_seed);

// Whether a comparison is between two H1 cells (true effects may differ).
bool is_h1_pair(const GroundTruth& truth, const ExperimentSpec& spec, const Comparison& pair);

struct MethodTrace {
  Method method = Method::mle;
  // [update] -> per-cell estimate means / variances
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::VectorXd> variances;
  // [tau index][update] -> one result per comparison
  std::vector<std::vector<std::vector<ComparisonResult>>> comparisons;
};

struct RepetitionResult {
  int repetition = 0;
  Arm arm = Arm::combined;
  GroundTruth truth;
  std::vector<MethodTrace> methods;
  std::vector<TauSpec> tau_specs;
  int divergences = 0;
  std::vector<std::string> warnings;

  const MethodTrace& trace(Method m) const;
};

RepetitionResult run_repetition(const GroundTruth& truth, const ScenarioConfig& config,
                                int repetition, Arm arm, const std::vector<TauSpec>& tau_specs);

struct MetricRow {
  int update = 0;  // 1-based
  std::string method;
  std::string tau_kind;  // "none" for estimation metrics
  std::string metric;
  double value = 0.0;
};

struct MetricsReport {
  std::vector<MetricRow> rows;
  // Per-repetition values at the final update, keyed by method name, in
  // repetition order.
  std::map<std::string, std::vector<double>> final_rmse_by_rep;
  std::map<std::string, std::vector<double>> final_h0_spread_by_rep;
  int repetitions_scored = 0;

  // Throws when absent.
  double get(int update, const std::string& method, const std::string& tau_kind,
             const std::string& metric) const;
};

// Accumulates repetitions in any order; finalize() averages per-repetition
// rates over repetitions.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(ScenarioConfig config);
  // `score_decisions` false limits the repetition to estimation metrics.
  void add(const RepetitionResult& rep, bool score_decisions = true);
  MetricsReport finalize() const;

 private:
  struct DecisionCounts {
    double h1_pairs = 0.0;
    double true_positives = 0.0;
    double h0_pairs = 0.0;
    double false_positives = 0.0;
  };
  struct ErrorSums {
    double sse = 0.0, n = 0.0;
    double sse_h1 = 0.0, n_h1 = 0.0;
    double sse_h0 = 0.0, n_h0 = 0.0;
  };
  ScenarioConfig config_;
  // (repetition, method, tau kind, update)
  std::map<std::tuple<int, std::string, std::string, int>, DecisionCounts> decisions_;
  // (repetition, method, update)
  std::map<std::tuple<int, std::string, int>, ErrorSums> errors_;
  std::map<std::tuple<int, std::string, int>, double> h0_spread_;
};

MetricsReport score(const std::vector<RepetitionResult>& repetitions,
                    const ScenarioConfig& config);

// Called for each finished repetition in repetition order.
using RepetitionSink = std::function<void(const RepetitionResult&)>;

struct ScenarioResult {
  MetricsReport report;
  std::optional<LearntTau> learnt_tau;
  std::vector<TauSpec> tau_specs;  // as scored, learnt value resolved
  std::vector<std::string> warnings;
};

// Runs every repetition of the scenario. When config.learn_tau is set the
// first half of repetitions trains tau and the second half is scored with
// every tau kind, including the learnt one.
ScenarioResult run_scenario(const ScenarioConfig& config, const RepetitionSink& sink = {});

// Same as run_scenario with learning enabled and the three tau kinds
// (fixed 0.1, dynamic, learnt).
ScenarioResult tau_experiment(ScenarioConfig config);

// Repeated fixed-horizon two-proportion z-test on two identical arms checked
// at every update. Returns the cumulative false-positive rate by update.
struct NaiveTestConfig {
  int repetitions = 1000;
  int updates = 30;
  std::int64_t assignments_per_arm_per_update = 1000;
  double rate = 0.5;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  Execution execution = Execution::parallel;
};
std::vector<double> naive_sequential_fpr(const NaiveTestConfig& config);

}  // namespace hbab::sim

#endif  // HBAB_SIM_HPP
