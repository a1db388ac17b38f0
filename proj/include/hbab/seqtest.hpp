#ifndef HBAB_SEQTEST_HPP
#define HBAB_SEQTEST_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "hbab/design.hpp"
#include "hbab/estimate.hpp"
#include "hbab/parallel.hpp"

namespace hbab {

class TestError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class TauKind { fixed, dynamic, learnt };

// Variance of the effect prior under the alternative hypothesis.
struct TauSpec {
  TauKind kind = TauKind::fixed;
  double value = 0.1;
  double epsilon_floor = 1e-8;

  static TauSpec fixed(double v) { return {TauKind::fixed, v}; }
  static TauSpec dynamic(double floor = 1e-8) { return {TauKind::dynamic, 0.0, floor}; }
  static TauSpec learnt(double v) { return {TauKind::learnt, v}; }

  void validate() const;
  std::string kind_name() const;
};

// Parses "fixed:0.1", "dynamic" or "learnt:0.004".
TauSpec parse_tau_spec(const std::string& text);

double resolve_tau(const TauSpec& spec, double diff_mean);

// Ratio of the observed difference's density under the two hypotheses:
// Normal(d; 0, tau + v) / Normal(d; 0, v).
double log_bayes_factor(double diff_mean, double diff_var, double tau);
double bayes_factor(double diff_mean, double diff_var, double tau);

struct DiffSummary {
  double mean = 0.0;
  double variance = 0.0;
  // No usable variance (undefined MLE cell or zero spread): the update
  // carries no evidence.
  bool degenerate = false;
};

// Draw-wise difference when both estimates carry matching draws, otherwise
// difference of means with summed variances.
DiffSummary difference(const CellEstimate& a, const CellEstimate& b);

struct ComparisonResult {
  Comparison pair;
  int updates = 0;
  double diff_mean = 0.0;
  double diff_var = 0.0;
  double tau = 0.0;
  double bayes_factor = 1.0;
  double p_instant = 1.0;
  double p_min = 1.0;
  bool significant = false;
  bool degenerate = false;
};

// Folds one Bayes factor into the running sequential p-value.
ComparisonResult record_bayes_factor(ComparisonResult state, double bayes_factor, double alpha);

ComparisonResult update_comparison(ComparisonResult state, const DiffSummary& diff,
                                   const TauSpec& tau, double alpha);

// One update of every pair from enumerate_comparisons(spec). `prior` is
// either empty (first update) or the previous update's results.
std::vector<ComparisonResult> run_all_comparisons(const std::vector<CellEstimate>& estimates,
                                                  const ExperimentSpec& spec,
                                                  const TauSpec& tau, double alpha,
                                                  const std::vector<ComparisonResult>& prior,
                                                  Execution exec = Execution::parallel);

// Pairs of content combinations after marginalizing over contexts. The
// returned pairs all carry context_combo = 0.
std::vector<ComparisonResult> run_marginal_comparisons(
    const std::vector<CellEstimate>& marginal, const ExperimentSpec& spec, const TauSpec& tau,
    double alpha, const std::vector<ComparisonResult>& prior);

}  // namespace hbab

#endif  // HBAB_SEQTEST_HPP
