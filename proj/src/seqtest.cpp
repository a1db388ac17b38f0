#include "hbab/seqtest.hpp"

#include <algorithm>
#include <cmath>

namespace hbab {

void TauSpec::validate() const {
  if (kind != TauKind::dynamic && !(value > 0.0))
    throw TestError("fixed and learnt tau must be positive");
  if (!(epsilon_floor > 0.0)) throw TestError("tau floor must be positive");
}

std::string TauSpec::kind_name() const {
  switch (kind) {
    case TauKind::fixed:
      return "fixed";
    case TauKind::dynamic:
      return "dynamic";
    case TauKind::learnt:
      return "learnt";
  }
  return {};
}

TauSpec parse_tau_spec(const std::string& text) {
  if (text == "dynamic") return TauSpec::dynamic();
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw TestError("tau must be fixed:V, dynamic or learnt:V");
  const std::string kind = text.substr(0, colon);
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw TestError("trailing characters");
  } catch (const std::exception&) {
    throw TestError("cannot parse tau value in '" + text + "'");
  }
  TauSpec spec;
  if (kind == "fixed")
    spec = TauSpec::fixed(value);
  else if (kind == "learnt")
    spec = TauSpec::learnt(value);
  else
    throw TestError("unknown tau kind '" + kind + "'");
  spec.validate();
  return spec;
}

double resolve_tau(const TauSpec& spec, double diff_mean) {
  switch (spec.kind) {
    case TauKind::fixed:
    case TauKind::learnt:
      return spec.value;
    case TauKind::dynamic:
      return std::max(diff_mean * diff_mean, spec.epsilon_floor);
  }
  return spec.value;
}

double log_bayes_factor(double diff_mean, double diff_var, double tau) {
  if (!(diff_var > 0.0)) throw TestError("difference variance must be positive");
  if (!(tau > 0.0)) throw TestError("tau must be positive");
  const double total = diff_var + tau;
  const double d2 = diff_mean * diff_mean;
  return 0.5 * std::log(diff_var / total) + 0.5 * d2 * (1.0 / diff_var - 1.0 / total);
}

double bayes_factor(double diff_mean, double diff_var, double tau) {
  return std::exp(log_bayes_factor(diff_mean, diff_var, tau));
}

DiffSummary difference(const CellEstimate& a, const CellEstimate& b) {
  DiffSummary d;
  if (!a.defined || !b.defined) {
    d.degenerate = true;
    return d;
  }
  if (a.has_draws() && b.has_draws() && a.draws.size() == b.draws.size()) {
    const std::size_t n = a.draws.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += a.draws[i] - b.draws[i];
    d.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = a.draws[i] - b.draws[i] - d.mean;
      ss += x * x;
    }
    d.variance = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
  } else {
    d.mean = a.mean - b.mean;
    d.variance = a.variance + b.variance;
  }
  // Below this the spread is floating-point round-off, not uncertainty.
  constexpr double kMinVariance = 1e-20;
  d.degenerate = !(d.variance > kMinVariance);
  return d;
}

ComparisonResult record_bayes_factor(ComparisonResult state, double bayes_factor, double alpha) {
  state.bayes_factor = bayes_factor;
  state.p_instant = std::min(1.0, 1.0 / bayes_factor);
  state.p_min = std::min(state.p_min, state.p_instant);
  state.significant = state.p_min < alpha;
  return state;
}

ComparisonResult update_comparison(ComparisonResult state, const DiffSummary& diff,
                                   const TauSpec& tau, double alpha) {
  ++state.updates;
  state.diff_mean = diff.mean;
  state.diff_var = diff.variance;
  state.degenerate = diff.degenerate;
  state.tau = resolve_tau(tau, diff.mean);
  if (diff.degenerate) return record_bayes_factor(state, 1.0, alpha);
  return record_bayes_factor(state, bayes_factor(diff.mean, diff.variance, state.tau), alpha);
}

namespace {

std::vector<ComparisonResult> run_pairs(const std::vector<CellEstimate>& estimates,
                                        const ExperimentSpec& spec,
                                        const std::vector<Comparison>& pairs, const TauSpec& tau,
                                        double alpha, const std::vector<ComparisonResult>& prior,
                                        Execution exec) {
  tau.validate();
  if (estimates.size() < spec.num_cells())
    throw TestError("missing estimate for cell " + std::to_string(estimates.size()) + " (" +
                    content_label(spec, spec.content_of(estimates.size())) + ", " +
                    context_label(spec, spec.context_of(estimates.size())) + ")");
  if (!prior.empty() && prior.size() != pairs.size())
    throw TestError("previous comparison state does not match the design");

  std::vector<ComparisonResult> out(pairs.size());
  for_each_index(exec, pairs.size(), [&](std::size_t i) {
    const auto& pair = pairs[i];
    ComparisonResult state;
    if (!prior.empty()) {
      state = prior[i];
      if (!(state.pair == pair)) throw TestError("previous comparison state is out of order");
    } else {
      state.pair = pair;
    }
    const auto& a = estimates[spec.cell_index(pair.content_a, pair.context_combo)];
    const auto& b = estimates[spec.cell_index(pair.content_b, pair.context_combo)];
    out[i] = update_comparison(state, difference(a, b), tau, alpha);
  });
  return out;
}

}  // namespace

std::vector<ComparisonResult> run_all_comparisons(const std::vector<CellEstimate>& estimates,
                                                  const ExperimentSpec& spec,
                                                  const TauSpec& tau, double alpha,
                                                  const std::vector<ComparisonResult>& prior,
                                                  Execution exec) {
  return run_pairs(estimates, spec, enumerate_comparisons(spec), tau, alpha, prior, exec);
}

std::vector<ComparisonResult> run_marginal_comparisons(
    const std::vector<CellEstimate>& marginal, const ExperimentSpec& spec, const TauSpec& tau,
    double alpha, const std::vector<ComparisonResult>& prior) {
  const ExperimentSpec content_only(spec.content_factors(), {});
  return run_pairs(marginal, content_only, enumerate_comparisons(content_only), tau, alpha, prior,
                   Execution::serial);
}

}  // namespace hbab
