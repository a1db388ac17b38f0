#include "hbab/estimate.hpp"

#include <cmath>
#include <string>

namespace hbab {

namespace {

void moments(CellEstimate& e) {
  const double n = static_cast<double>(e.draws.size());
  double sum = 0.0;
  for (double d : e.draws) sum += d;
  e.mean = sum / n;
  double ss = 0.0;
  for (double d : e.draws) ss += (d - e.mean) * (d - e.mean);
  e.variance = n > 1 ? ss / (n - 1.0) : 0.0;
}

}  // namespace

CellEstimate mle_estimate(std::int64_t assignments, std::int64_t responses) {
  if (assignments < 0 || responses < 0 || responses > assignments)
    throw ModelError("mle_estimate requires 0 <= responses <= assignments");
  CellEstimate e;
  if (assignments == 0) {
    e.defined = false;
    return e;
  }
  const double a = static_cast<double>(assignments);
  e.mean = static_cast<double>(responses) / a;
  e.variance = e.mean * (1.0 - e.mean) / a;
  return e;
}

std::vector<CellEstimate> mle_estimates(const CountData& data) {
  std::vector<CellEstimate> out;
  out.reserve(data.size());
  for (std::size_t k = 0; k < data.size(); ++k)
    out.push_back(mle_estimate(data.assignments[k], data.responses[k]));
  return out;
}

PosteriorSamples fit_hierarchical(const DesignMatrix& X, const CountData& data,
                                  const HierarchicalFit& fit) {
  const HierarchicalModel model(X, data, fit.hyper, fit.parameterization);
  Target target;
  target.dimension = model.dimension();
  target.labels = model.natural_labels();
  target.log_density_gradient = [&model](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    return model.log_density_gradient(q, g);
  };
  target.transform = [&model](const Eigen::VectorXd& q) { return model.natural(q); };
  return sample(target, fit.sampler);
}

std::vector<CellEstimate> hb_estimate(const PosteriorSamples& samples, const DesignMatrix& X,
                                      Execution exec) {
  const auto K = X.cols();
  if (samples.dimension() < K + 1) throw ModelError("samples do not cover the design columns");
  for (Eigen::Index j = 0; j < K; ++j)
    if (samples.labels()[static_cast<std::size_t>(j)] != "beta[" + std::to_string(j) + "]")
      throw ModelError("samples do not match design matrix: expected beta[" +
                       std::to_string(j) + "]");
  const Eigen::MatrixXd all = samples.stacked();
  const Eigen::VectorXd epsilon = all.col(samples.index_of("epsilon"));
  const auto betas = all.leftCols(K);

  std::vector<CellEstimate> out(static_cast<std::size_t>(X.rows()));
  for_each_index(exec, out.size(), [&](std::size_t k) {
    const Eigen::VectorXd eta = betas * X.entries.row(static_cast<Eigen::Index>(k)).transpose();
    auto& e = out[k];
    e.draws.resize(static_cast<std::size_t>(eta.size()));
    for (Eigen::Index i = 0; i < eta.size(); ++i)
      e.draws[static_cast<std::size_t>(i)] = sigmoid(eta[i] + epsilon[i]);
    moments(e);
  });
  return out;
}

std::vector<double> marginal_weights(const std::vector<double>& traffic) {
  double total = 0.0;
  for (double t : traffic) {
    if (t < 0.0) throw ModelError("traffic must be non-negative");
    total += t;
  }
  if (!(total > 0.0)) throw ModelError("cannot derive marginal weights from zero traffic");
  std::vector<double> w;
  w.reserve(traffic.size());
  for (double t : traffic) w.push_back(t / total);
  return w;
}

std::vector<double> context_traffic(const ExperimentSpec& spec, const CountData& data) {
  data.validate(spec.num_cells());
  std::vector<double> t(spec.num_context_combos(), 0.0);
  for (std::size_t k = 0; k < spec.num_cells(); ++k)
    t[spec.context_of(k)] += static_cast<double>(data.assignments[k]);
  return t;
}

std::vector<CellEstimate> marginalize(const std::vector<CellEstimate>& cells,
                                      const ExperimentSpec& spec,
                                      const std::vector<double>& traffic) {
  if (cells.size() != spec.num_cells())
    throw ModelError("expected " + std::to_string(spec.num_cells()) + " cell estimates, got " +
                     std::to_string(cells.size()));
  if (traffic.size() != spec.num_context_combos())
    throw ModelError("traffic must have one entry per context combination");
  const std::vector<double> w = marginal_weights(traffic);
  const std::size_t C = spec.num_context_combos();

  std::vector<CellEstimate> out(spec.num_content_combos());
  for (std::size_t m = 0; m < out.size(); ++m) {
    bool draw_wise = true;
    bool defined = true;
    std::size_t n_draws = 0;
    for (std::size_t c = 0; c < C; ++c) {
      if (w[c] == 0.0) continue;
      const auto& e = cells[spec.cell_index(m, c)];
      defined = defined && e.defined;
      if (!e.has_draws() || (n_draws && e.draws.size() != n_draws)) draw_wise = false;
      n_draws = e.draws.size();
    }
    auto& out_e = out[m];
    if (!defined) {
      out_e.defined = false;
      continue;
    }
    if (draw_wise) {
      out_e.draws.assign(n_draws, 0.0);
      for (std::size_t c = 0; c < C; ++c) {
        if (w[c] == 0.0) continue;
        const auto& d = cells[spec.cell_index(m, c)].draws;
        for (std::size_t i = 0; i < n_draws; ++i) out_e.draws[i] += w[c] * d[i];
      }
      moments(out_e);
    } else {
      for (std::size_t c = 0; c < C; ++c) {
        if (w[c] == 0.0) continue;
        const auto& e = cells[spec.cell_index(m, c)];
        out_e.mean += w[c] * e.mean;
        out_e.variance += w[c] * w[c] * e.variance;
      }
    }
  }
  return out;
}

}  // namespace hbab
