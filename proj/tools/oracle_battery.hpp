#ifndef HBAB_TOOLS_ORACLE_BATTERY_HPP
#define HBAB_TOOLS_ORACLE_BATTERY_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hbab/conjugate.hpp"

namespace hbab::oracle {

struct CheckResult {
  std::string name;
  std::string tolerance;
  double observed = 0.0;
  double limit = 0.0;
  bool passed = false;
  std::string detail;
};

using ClosedForm = std::function<conjugate::Posterior(const conjugate::Instance&)>;

// A closed form with the pooling term dropped from beta_hat; used as a
// negative control.
conjugate::Posterior mutated_posterior(const conjugate::Instance& instance);

struct BatteryOptions {
  int instances = 50;
  int max_cells = 5;
  int replications = 100000;
  int mcmc_instances = 50;
  std::uint64_t seed = 2026;
  ClosedForm closed_form = conjugate::posterior;
};

// Closed form against quadrature on random instances; max absolute error.
CheckResult check_quadrature(const BatteryOptions& o);
// Monte-Carlo mean of beta_hat against the expected-value formula, and
// Monte-Carlo variance against the upper bound.
CheckResult check_estimator_mean(const BatteryOptions& o);
CheckResult check_variance_bound(const BatteryOptions& o);
// c1(10, 1) < 1 and Var(beta_hat_f) <= c1 * s_f^2 on an instance meeting the
// first condition.
CheckResult check_shrinkage(const BatteryOptions& o);
// Posterior means and variances from the sampler within 3 Monte-Carlo
// standard errors of the closed form.
CheckResult check_sampler(const BatteryOptions& o);

std::vector<CheckResult> run_battery(const BatteryOptions& o);

}  // namespace hbab::oracle

#endif  // HBAB_TOOLS_ORACLE_BATTERY_HPP
