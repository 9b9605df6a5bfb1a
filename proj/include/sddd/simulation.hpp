#ifndef SDDD_SIMULATION_HPP
#define SDDD_SIMULATION_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sddd/diagnostics.hpp"
#include "sddd/estimators.hpp"
#include "sddd/panel.hpp"
#include "sddd/stacks.hpp"

namespace sddd {

// Synthetic staggered-adoption DDD data generating process:
//   Y_it = alpha_i + delta(S_i, t) + eta(Q_i, t) [+ violation(S_i, Q_i, t)]
//          + 1{t >= S_i} Q_i catt(S_i, t - S_i) + noise_sd * eps_it,
// alpha_i and eps_it standard normal, deterministic given seed. With no
// violation term the eligible-ineligible gap in untreated trends is
// eta(1,t) - eta(0,t) for every cohort, so the parallel-changes-in-trends
// restriction holds by construction; ineligible units never receive
// treatment terms.
struct DgpConfig {
  std::vector<std::pair<int, double>> cohorts;  // (g, share), shares > 0
  double never_share = 0.0;
  std::map<int, double> eligible_share;  // cohort -> p in (0,1); key 0 = never
  int n_units = 100;
  int T = 6;
  double noise_sd = 1.0;
  std::uint64_t seed = 1;

  std::function<double(const CohortLabel &, int)> group_time_trend;
  std::function<double(bool, int)> eligibility_time_trend;
  std::function<double(const CohortLabel &, bool, int)> violation;  // optional
  std::function<double(int, int)> catt;  // (g, e >= 0) -> effect

  // Eligible share for a cohort, defaulting to the key-0 entry.
  double eligible_share_for(const CohortLabel &c) const;
  void check() const;
};

PanelDataset simulate_panel(const DgpConfig &cfg);

// cfg.catt(g, e) for e >= 0, zero before onset. Unknown cohort throws.
double true_catt(const DgpConfig &cfg, int g, int e);

struct EstimatorSpec {
  enum class Kind { Stacked, PooledHw, Pooled3wfe };
  Kind kind = Kind::Stacked;
  std::string label = "stacked";
  WeightScheme scheme = WeightScheme::cohort_size();
  ComparisonRule rule = ComparisonRule::prefer_never();
  int L = 1;
  int K = 0;
  double alpha = 0.05;
};

struct McCell {
  double mean_bias = 0.0;
  double rmse = 0.0;
  double coverage_95 = 0.0;  // CI coverage at the spec's alpha
  double mean_se = 0.0;
  double mean_estimate = 0.0;
  double target = 0.0;
  int reps_used = 0;
};

struct McSummary {
  // (estimator label, e) -> summary
  std::map<std::pair<std::string, int>, McCell> cells;
  int reps = 0;
  std::map<std::string, int> failures;  // label -> reps where it threw
};

// Runs simulate -> estimate -> CI per replication with derived seeds
// seed_b = hash(master, b); replication results are independent of execution
// order. Stacked estimators get influence-function pointwise CIs; the pooled
// diagnostics report point estimates only (their bias columns are measured
// against the same scheme-weighted target). Estimator failures are recorded
// per replication and excluded.
McSummary monte_carlo(const DgpConfig &cfg,
                      const std::vector<EstimatorSpec> &specs, int reps);

}  // namespace sddd

#endif  // SDDD_SIMULATION_HPP
