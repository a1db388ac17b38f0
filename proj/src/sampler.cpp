#include "hbab/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace hbab {

namespace {

constexpr double kMaxDeltaH = 1000.0;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

bool no_u_turn(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
               const Eigen::VectorXd& rho) {
  return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
}

// Dual averaging of log step size toward a target acceptance statistic.
class StepSizeAdapter {
 public:
  explicit StepSizeAdapter(double delta) : delta_(delta) {}

  void restart(double step_size) {
    mu_ = std::log(10.0 * step_size);
    counter_ = 0.0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }

  double learn(double accept_stat) {
    counter_ += 1.0;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / kGamma;
    const double x_eta = std::pow(counter_, -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }

  double final_step_size() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double delta_;
  double mu_ = 0.0;
  double counter_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
};

// Windowed estimation of the diagonal inverse metric: fast initial buffer,
// doubling slow windows, fast terminal buffer.
class MetricAdapter {
 public:
  MetricAdapter(int warmup, int dim) : warmup_(warmup), dim_(dim) {
    if (warmup < 20) {
      enabled_ = false;
      return;
    }
    if (init_buffer_ + base_window_ + term_buffer_ > warmup) {
      init_buffer_ = static_cast<int>(0.15 * warmup);
      term_buffer_ = static_cast<int>(0.1 * warmup);
      base_window_ = warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
    reset_estimator();
  }

  // Returns true when the metric was updated.
  bool learn(const Eigen::VectorXd& q, Eigen::VectorXd& inv_metric) {
    if (!enabled_) return false;
    if (in_window()) add_sample(q);
    if (end_of_window()) {
      compute_next_window();
      const double n = static_cast<double>(n_);
      const Eigen::VectorXd var = m2_ / (n - 1.0);
      inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
      reset_estimator();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_;
  }
  bool end_of_window() const { return counter_ == next_window_ && counter_ != warmup_; }

  void compute_next_window() {
    const int last = warmup_ - term_buffer_ - 1;
    if (next_window_ == last) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ == last) return;
    if (next_window_ + 2 * window_size_ >= warmup_ - term_buffer_) next_window_ = last;
  }

  void reset_estimator() {
    n_ = 0;
    mean_ = Eigen::VectorXd::Zero(dim_);
    m2_ = Eigen::VectorXd::Zero(dim_);
  }

  void add_sample(const Eigen::VectorXd& q) {
    ++n_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += (delta.array() * (q - mean_).array()).matrix();
  }

  int warmup_;
  int dim_;
  bool enabled_ = true;
  int init_buffer_ = 75;
  int term_buffer_ = 50;
  int base_window_ = 25;
  int window_size_ = 0;
  int next_window_ = 0;
  int counter_ = 0;
  long n_ = 0;
  Eigen::VectorXd mean_, m2_;
};

struct PhasePoint {
  Eigen::VectorXd q, p, grad;
  double log_density = 0.0;
};

struct ChainResult {
  Eigen::MatrixXd draws;  // kept x reported dimension
  int divergences = 0;
  double step_size = 0.0;
  double mean_accept = 0.0;
  double mean_depth = 0.0;
};

class NutsChain {
 public:
  NutsChain(const Target& target, const SamplerConfig& config, int chain)
      : target_(target),
        config_(config),
        rng_(make_stream(config.seed, {static_cast<std::uint64_t>(chain)})),
        inv_metric_(Eigen::VectorXd::Ones(target.dimension)) {}

  ChainResult run() {
    init_position();
    StepSizeAdapter step_adapter(config_.target_accept);
    MetricAdapter metric_adapter(config_.warmup_draws, target_.dimension);
    init_step_size();
    step_adapter.restart(step_size_);

    for (int i = 0; i < config_.warmup_draws; ++i) {
      transition();
      step_size_ = step_adapter.learn(accept_stat_);
      if (metric_adapter.learn(z_.q, inv_metric_)) {
        init_step_size();
        step_adapter.restart(step_size_);
      }
    }
    if (config_.warmup_draws > 0) step_size_ = step_adapter.final_step_size();

    const int reported = static_cast<int>(report(z_.q).size());
    ChainResult out;
    out.draws.resize(config_.kept_draws, reported);
    double accept_sum = 0.0;
    double depth_sum = 0.0;
    for (int i = 0; i < config_.kept_draws; ++i) {
      transition();
      if (divergent_) ++out.divergences;
      accept_sum += accept_stat_;
      depth_sum += depth_;
      out.draws.row(i) = report(z_.q).transpose();
    }
    out.step_size = step_size_;
    out.mean_accept = config_.kept_draws ? accept_sum / config_.kept_draws : 0.0;
    out.mean_depth = config_.kept_draws ? depth_sum / config_.kept_draws : 0.0;
    return out;
  }

 private:
  Eigen::VectorXd report(const Eigen::VectorXd& q) const {
    return target_.transform ? target_.transform(q) : q;
  }

  double evaluate(const Eigen::VectorXd& q, Eigen::VectorXd& grad) const {
    return target_.log_density_gradient(q, grad);
  }

  void init_position() {
    const int d = target_.dimension;
    if (target_.init.size() == d) {
      z_.q = target_.init;
    } else {
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      z_.q.resize(d);
      for (int i = 0; i < d; ++i) z_.q[i] = unif(rng_);
    }
    z_.log_density = evaluate(z_.q, z_.grad);
    if (!std::isfinite(z_.log_density) || !z_.grad.allFinite())
      throw SamplerError("log density or gradient is not finite at the initial point");
    z_.p = Eigen::VectorXd::Zero(d);
  }

  void sample_momentum(PhasePoint& z) {
    std::normal_distribution<double> normal(0.0, 1.0);
    z.p.resize(target_.dimension);
    for (int i = 0; i < target_.dimension; ++i) z.p[i] = normal(rng_) / std::sqrt(inv_metric_[i]);
  }

  double energy(const PhasePoint& z) const {
    return detail::hamiltonian(z.log_density, z.p, inv_metric_);
  }

  void step(PhasePoint& z, double eps) {
    z.log_density = detail::leapfrog(target_, inv_metric_, eps, 1, z.q, z.p, z.grad);
  }

  // Heuristic: double or halve until one leapfrog step crosses acceptance 0.8.
  void init_step_size() {
    const PhasePoint start = z_;
    const double threshold = std::log(0.8);
    auto delta_h = [&]() {
      z_ = start;
      sample_momentum(z_);
      const double h0 = energy(z_);
      step(z_, step_size_);
      double h = energy(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      return h0 - h;
    };
    const int direction = delta_h() > threshold ? 1 : -1;
    for (int iter = 0; iter < 100; ++iter) {
      const double dh = delta_h();
      if (direction == 1 && !(dh > threshold)) break;
      if (direction == -1 && !(dh < threshold)) break;
      step_size_ = direction == 1 ? 2.0 * step_size_ : 0.5 * step_size_;
      if (step_size_ > 1e7 || step_size_ <= 0.0)
        throw SamplerError("step size heuristic diverged; posterior may be improper");
    }
    z_ = start;
  }

  struct SubtreeState {
    Eigen::VectorXd p_sharp_beg, p_sharp_end, rho, p_beg, p_end;
  };

  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose,
                  Eigen::VectorXd& p_sharp_beg, Eigen::VectorXd& p_sharp_end,
                  Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end,
                  double h0, int direction, int& n_leapfrog, double& log_sum_weight,
                  double& sum_metro_prob) {
    if (depth == 0) {
      step(z, direction * step_size_);
      ++n_leapfrog;
      double h = energy(z);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      if (h - h0 > kMaxDeltaH) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      p_sharp_beg = (inv_metric_.array() * z.p.array()).matrix();
      p_sharp_end = p_sharp_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = z.p;
      return !divergent_;
    }

    const Eigen::Index d = target_.dimension;
    // First half.
    Eigen::VectorXd rho_init = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd p_init_end(d), p_sharp_init_end(d);
    double lsw_init = kNegInf;
    if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg,
                    p_init_end, h0, direction, n_leapfrog, lsw_init, sum_metro_prob))
      return false;

    // Second half.
    PhasePoint z_propose_final = z;
    Eigen::VectorXd rho_final = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd p_final_beg(d), p_sharp_final_beg(d);
    double lsw_final = kNegInf;
    if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final,
                    p_final_beg, p_end, h0, direction, n_leapfrog, lsw_final, sum_metro_prob))
      return false;

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      if (unif(rng_) < std::exp(lsw_final - lsw_subtree)) z_propose = z_propose_final;
    }

    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;

    bool persist = no_u_turn(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && no_u_turn(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && no_u_turn(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  void transition() {
    divergent_ = false;
    sample_momentum(z_);
    PhasePoint z_fwd = z_;
    PhasePoint z_bck = z_;
    PhasePoint z_sample = z_;
    PhasePoint z_propose = z_;

    Eigen::VectorXd p_sharp = (inv_metric_.array() * z_.p.array()).matrix();
    Eigen::VectorXd p_fwd_fwd = z_.p, p_sharp_fwd_fwd = p_sharp;
    Eigen::VectorXd p_fwd_bck = z_.p, p_sharp_fwd_bck = p_sharp;
    Eigen::VectorXd p_bck_fwd = z_.p, p_sharp_bck_fwd = p_sharp;
    Eigen::VectorXd p_bck_bck = z_.p, p_sharp_bck_bck = p_sharp;
    Eigen::VectorXd rho = z_.p;

    double log_sum_weight = 0.0;
    const double h0 = energy(z_);
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    depth_ = 0;
    while (depth_ < config_.max_tree_depth) {
      const Eigen::Index d = target_.dimension;
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(d);
      Eigen::VectorXd rho_bck = Eigen::VectorXd::Zero(d);
      bool valid_subtree = false;
      double lsw_subtree = kNegInf;

      if (unif(rng_) > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid_subtree = build_tree(depth_, z_fwd, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd,
                                   rho_fwd, p_fwd_bck, p_fwd_fwd, h0, 1, n_leapfrog, lsw_subtree,
                                   sum_metro_prob);
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid_subtree = build_tree(depth_, z_bck, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck,
                                   rho_bck, p_bck_fwd, p_bck_bck, h0, -1, n_leapfrog, lsw_subtree,
                                   sum_metro_prob);
      }
      if (!valid_subtree) break;
      ++depth_;

      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (unif(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && no_u_turn(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && no_u_turn(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }

    accept_stat_ = n_leapfrog ? sum_metro_prob / n_leapfrog : 0.0;
    z_ = z_sample;
  }

  const Target& target_;
  const SamplerConfig& config_;
  Rng rng_;
  Eigen::VectorXd inv_metric_;
  PhasePoint z_;
  double step_size_ = 1.0;
  double accept_stat_ = 0.0;
  bool divergent_ = false;
  int depth_ = 0;
};

}  // namespace

void SamplerConfig::validate() const {
  if (chains < 1) throw SamplerError("chains must be >= 1");
  if (warmup_draws < 0) throw SamplerError("warmup draws must be >= 0");
  if (kept_draws < 100) throw SamplerError("kept draws must be >= 100");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw SamplerError("target acceptance must lie in (0, 1)");
  if (max_tree_depth < 1) throw SamplerError("max tree depth must be >= 1");
}

PosteriorSamples::PosteriorSamples(std::vector<std::string> labels,
                                   std::vector<Eigen::MatrixXd> chain_draws)
    : labels_(std::move(labels)), draws_(std::move(chain_draws)) {
  for (const auto& m : draws_)
    if (m.cols() != static_cast<Eigen::Index>(labels_.size()) ||
        m.rows() != draws_.front().rows())
      throw SamplerError("chain draws do not match labels");
}

int PosteriorSamples::index_of(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw SamplerError("unknown parameter '" + label + "'");
  return static_cast<int>(it - labels_.begin());
}

Eigen::VectorXd PosteriorSamples::column(int d) const {
  if (d < 0 || d >= dimension()) throw SamplerError("parameter index out of range");
  const Eigen::Index n = kept_draws();
  Eigen::VectorXd out(n * chains());
  for (int c = 0; c < chains(); ++c) out.segment(c * n, n) = draws_[static_cast<std::size_t>(c)].col(d);
  return out;
}

Eigen::MatrixXd PosteriorSamples::stacked() const {
  const Eigen::Index n = kept_draws();
  Eigen::MatrixXd out(n * chains(), dimension());
  for (int c = 0; c < chains(); ++c)
    out.middleRows(c * n, n) = draws_[static_cast<std::size_t>(c)];
  return out;
}

namespace detail {

double leapfrog(const Target& target, const Eigen::VectorXd& inv_metric, double step_size,
                int steps, Eigen::VectorXd& q, Eigen::VectorXd& p, Eigen::VectorXd& grad) {
  double lp = 0.0;
  if (grad.size() != q.size()) lp = target.log_density_gradient(q, grad);
  for (int s = 0; s < steps; ++s) {
    p += 0.5 * step_size * grad;
    q += step_size * (inv_metric.array() * p.array()).matrix();
    lp = target.log_density_gradient(q, grad);
    p += 0.5 * step_size * grad;
  }
  return lp;
}

double hamiltonian(double log_density, const Eigen::VectorXd& p,
                   const Eigen::VectorXd& inv_metric) {
  return -log_density + 0.5 * (p.array().square() * inv_metric.array()).sum();
}

}  // namespace detail

PosteriorSamples sample(const Target& target, const SamplerConfig& config) {
  config.validate();
  if (target.dimension < 1 || !target.log_density_gradient)
    throw SamplerError("target must define a positive dimension and a density");

  std::vector<ChainResult> results(static_cast<std::size_t>(config.chains));
  for_each_index(config.execution, results.size(), [&](std::size_t c) {
    NutsChain chain(target, config, static_cast<int>(c));
    results[c] = chain.run();
  });

  std::vector<std::string> labels = target.labels;
  const auto reported = results.front().draws.cols();
  if (static_cast<Eigen::Index>(labels.size()) != reported) {
    labels.clear();
    for (Eigen::Index i = 0; i < reported; ++i) labels.push_back("theta[" + std::to_string(i) + "]");
  }
  std::vector<Eigen::MatrixXd> draws;
  draws.reserve(results.size());
  Diagnostics diag;
  double depth_sum = 0.0;
  for (auto& r : results) {
    if (!r.draws.allFinite()) throw SamplerError("sampler produced non-finite draws");
    diag.divergence_count += r.divergences;
    diag.step_size.push_back(r.step_size);
    diag.mean_accept_stat.push_back(r.mean_accept);
    depth_sum += r.mean_depth;
    draws.push_back(std::move(r.draws));
  }
  diag.mean_tree_depth = depth_sum / static_cast<double>(results.size());
  diag.divergence_warning =
      diag.divergence_count > 0.1 * static_cast<double>(config.chains) * config.kept_draws;

  PosteriorSamples out(std::move(labels), std::move(draws));
  out.diagnostics = std::move(diag);
  compute_diagnostics(out);
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw SamplerError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Summary summarize(const Eigen::VectorXd& draws) {
  if (draws.size() == 0) throw SamplerError("cannot summarize an empty sample");
  Summary s;
  const double n = static_cast<double>(draws.size());
  s.mean = draws.mean();
  s.sd = draws.size() > 1 ? std::sqrt((draws.array() - s.mean).square().sum() / (n - 1.0)) : 0.0;
  std::vector<double> v(draws.data(), draws.data() + draws.size());
  s.q025 = quantile(v, 0.025);
  s.q50 = quantile(v, 0.5);
  s.q975 = quantile(std::move(v), 0.975);
  return s;
}

Summary posterior_summary(const PosteriorSamples& samples, const std::string& parameter) {
  return summarize(samples.column(parameter));
}

namespace {

std::vector<Eigen::VectorXd> split_chains(const std::vector<Eigen::VectorXd>& chains) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& c : chains) {
    const Eigen::Index half = c.size() / 2;
    // Odd lengths drop the middle draw.
    out.emplace_back(c.head(half));
    out.emplace_back(c.tail(half));
  }
  return out;
}

}  // namespace

double split_r_hat(const std::vector<Eigen::VectorXd>& chains) {
  const auto parts = split_chains(chains);
  const double m = static_cast<double>(parts.size());
  const double n = static_cast<double>(parts.front().size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd means(parts.size()), vars(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    means[static_cast<Eigen::Index>(i)] = parts[i].mean();
    vars[static_cast<Eigen::Index>(i)] =
        (parts[i].array() - parts[i].mean()).square().sum() / (n - 1.0);
  }
  const double w = vars.mean();
  const double b_over_n = m > 1 ? (means.array() - means.mean()).square().sum() / (m - 1.0) : 0.0;
  if (w <= 0.0) return b_over_n > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const std::vector<Eigen::VectorXd>& chains) {
  const auto parts = split_chains(chains);
  const std::size_t m = parts.size();
  const Eigen::Index n = parts.front().size();
  const double nd = static_cast<double>(n);
  if (n < 4) return static_cast<double>(m) * nd;

  std::vector<Eigen::VectorXd> centered;
  Eigen::VectorXd means(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    means[static_cast<Eigen::Index>(i)] = parts[i].mean();
    centered.emplace_back(parts[i].array() - parts[i].mean());
  }
  // Mean over chains of the biased autocovariance at `lag`.
  auto mean_acov = [&](Eigen::Index lag) {
    double total = 0.0;
    for (const auto& c : centered)
      total += c.head(n - lag).dot(c.tail(n - lag)) / nd;
    return total / static_cast<double>(m);
  };

  const double mean_var = mean_acov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += (means.array() - means.mean()).square().sum() / (static_cast<double>(m) - 1.0);
  if (var_plus <= 0.0) return static_cast<double>(m) * nd;

  std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[0] = rho_even;
  rho[1] = rho_odd;
  Eigen::Index t = 1;
  while (t < n - 5 && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[static_cast<std::size_t>(t + 1)] = rho_even;
      rho[static_cast<std::size_t>(t + 2)] = rho_odd;
    }
    t += 2;
  }
  const Eigen::Index max_t = t;
  if (rho_even > 0.0 && max_t + 1 < n) rho[static_cast<std::size_t>(max_t + 1)] = rho_even;

  // Enforce a monotone sequence of paired sums.
  for (Eigen::Index s = 1; s <= max_t - 2; s += 2) {
    const auto i = static_cast<std::size_t>(s);
    if (rho[i + 1] + rho[i + 2] > rho[i - 1] + rho[i]) {
      rho[i + 1] = (rho[i - 1] + rho[i]) / 2.0;
      rho[i + 2] = rho[i + 1];
    }
  }

  const double total = static_cast<double>(m) * nd;
  double tau = -1.0;
  for (Eigen::Index s = 0; s <= max_t && s < n; ++s) tau += 2.0 * rho[static_cast<std::size_t>(s)];
  if (max_t + 1 < n) tau += rho[static_cast<std::size_t>(max_t + 1)];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

void compute_diagnostics(PosteriorSamples& samples) {
  auto& diag = samples.diagnostics;
  diag.split_r_hat.assign(static_cast<std::size_t>(samples.dimension()), 1.0);
  diag.effective_sample_size.assign(static_cast<std::size_t>(samples.dimension()), 0.0);
  for (int d = 0; d < samples.dimension(); ++d) {
    std::vector<Eigen::VectorXd> per_chain;
    for (int c = 0; c < samples.chains(); ++c) per_chain.emplace_back(samples.chain(c).col(d));
    diag.split_r_hat[static_cast<std::size_t>(d)] = split_r_hat(per_chain);
    diag.effective_sample_size[static_cast<std::size_t>(d)] = effective_sample_size(per_chain);
  }
}

void write_draws_csv(const PosteriorSamples& samples, std::ostream& out) {
  out << "chain,draw,parameter,value\n";
  char buf[64];
  for (int c = 0; c < samples.chains(); ++c)
    for (int i = 0; i < samples.kept_draws(); ++i)
      for (int d = 0; d < samples.dimension(); ++d) {
        std::snprintf(buf, sizeof buf, "%.17g", samples.draw(c, i, d));
        out << c << ',' << i << ',' << samples.labels()[static_cast<std::size_t>(d)] << ','
            << buf << '\n';
      }
}

}  // namespace hbab
