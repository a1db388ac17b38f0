#ifndef HBAB_SAMPLER_HPP
#define HBAB_SAMPLER_HPP

#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbab/parallel.hpp"
#include "hbab/random.hpp"

namespace hbab {

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Log density and its gradient over an unconstrained vector. `transform`
// maps a sampled point to the reported (natural) parameters; identity when
// empty.
struct Target {
  int dimension = 0;
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)> log_density_gradient;
  std::vector<std::string> labels;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> transform;
  // Optional initial point; when empty each chain draws uniformly in [-1, 1].
  Eigen::VectorXd init;
};

struct SamplerConfig {
  int chains = 4;
  int warmup_draws = 500;
  int kept_draws = 500;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 0;
  Execution execution = Execution::parallel;

  void validate() const;
};

struct Diagnostics {
  std::vector<double> split_r_hat;
  std::vector<double> effective_sample_size;
  int divergence_count = 0;
  // Raised when more than 10% of kept transitions diverged.
  bool divergence_warning = false;
  std::vector<double> step_size;         // per chain, after adaptation
  std::vector<double> mean_accept_stat;  // per chain, kept draws
  double mean_tree_depth = 0.0;
};

class PosteriorSamples {
 public:
  PosteriorSamples() = default;
  PosteriorSamples(std::vector<std::string> labels, std::vector<Eigen::MatrixXd> chain_draws);

  int chains() const { return static_cast<int>(draws_.size()); }
  int kept_draws() const { return draws_.empty() ? 0 : static_cast<int>(draws_[0].rows()); }
  int dimension() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }

  // kept_draws x dimension for one chain.
  const Eigen::MatrixXd& chain(int c) const { return draws_.at(static_cast<std::size_t>(c)); }
  double draw(int c, int i, int d) const { return draws_[static_cast<std::size_t>(c)](i, d); }

  int index_of(const std::string& label) const;  // throws on unknown label
  // All draws of one parameter, chains concatenated in chain order.
  Eigen::VectorXd column(int d) const;
  Eigen::VectorXd column(const std::string& label) const { return column(index_of(label)); }
  // (chains * kept) x dimension.
  Eigen::MatrixXd stacked() const;

  Diagnostics diagnostics;

 private:
  std::vector<std::string> labels_;
  std::vector<Eigen::MatrixXd> draws_;
};

PosteriorSamples sample(const Target& target, const SamplerConfig& config);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

Summary posterior_summary(const PosteriorSamples& samples, const std::string& parameter);
Summary summarize(const Eigen::VectorXd& draws);

// Sample quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

// Split potential scale reduction over per-chain draw vectors.
double split_r_hat(const std::vector<Eigen::VectorXd>& chains);
// Multi-chain effective sample size (split chains, Geyer initial monotone sequence).
double effective_sample_size(const std::vector<Eigen::VectorXd>& chains);

void compute_diagnostics(PosteriorSamples& samples);

// CSV with columns chain,draw,parameter,value.
void write_draws_csv(const PosteriorSamples& samples, std::ostream& out);

namespace detail {

// Leapfrog steps with a diagonal inverse metric. Returns the log density at the
// final position and leaves its gradient in `grad`.
double leapfrog(const Target& target, const Eigen::VectorXd& inv_metric, double step_size,
                int steps, Eigen::VectorXd& q, Eigen::VectorXd& p, Eigen::VectorXd& grad);

double hamiltonian(double log_density, const Eigen::VectorXd& p,
                   const Eigen::VectorXd& inv_metric);

}  // namespace detail

}  // namespace hbab

#endif  // HBAB_SAMPLER_HPP
