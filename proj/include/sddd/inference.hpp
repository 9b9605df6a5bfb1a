#ifndef SDDD_INFERENCE_HPP
#define SDDD_INFERENCE_HPP

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "sddd/estimators.hpp"
#include "sddd/stacks.hpp"

namespace sddd {

// Within-stack influence contributions at one event time, keyed by dataset
// unit index. For a usable unit in cell (s,q):
//   psi = (c_{s,q} / pi_{s,q}) * (dy - cell mean),
// with signs (+,-,-,+) in role order and pi the usable cell share. Units
// outside the stack or without usable data contribute zero and are absent.
std::map<std::size_t, double> stack_influence(const PanelDataset &ds,
                                              const Stack &stack, int e);

// Aggregated influence phi_i(e) over the stacks feasible at e, with the
// scaling phi_i = sum_g (n * w_g / n_g) * psi_{g,i}; n counts distinct units
// across the union of those stacks (shared comparison units once).
struct AggregatedInfluence {
  std::vector<std::size_t> units;  // distinct unit indexes, ascending
  std::vector<double> phi;         // aligned with units
  int n = 0;                       // = units.size()
};

AggregatedInfluence aggregated_influence(const PanelDataset &ds,
                                         const std::vector<Stack> &stacks,
                                         const std::map<int, double> &weights,
                                         int e);

// Plug-in variance n^{-1} sum_i phi_i^2 (the variance of sqrt(n) times the
// estimator). Summing per unit before squaring is what picks up the
// cross-stack covariance of shared comparison units.
double plugin_variance(const std::vector<double> &phi, int n);
double plugin_variance(const AggregatedInfluence &infl);

// estimate +/- z_{alpha/2} * sqrt(v / n).
std::pair<double, double> pointwise_ci(double estimate, double v, int n,
                                       double alpha);

// Plug-in within-stack asymptotic variance Sigma_g(e): sum over cells of
// s^2_cell / (n_cell / n_g), for the sqrt(n_g)-scaled estimator.
double stack_sigma2(const PanelDataset &ds, const Stack &stack, int e);

// Variance of the stack's triple-difference estimate itself:
// Sigma_g(e) / n_g = sum over cells of s^2_cell / n_cell.
double stack_estimate_variance(const PanelDataset &ds, const Stack &stack,
                               int e);

// Per-stack estimate variances keyed e -> cohort -> Var(tau_hat), the input
// precision weighting expects.
std::map<int, std::map<int, double>> estimate_variances_by_event(
    const PanelDataset &ds, const std::vector<Stack> &stacks);

// Unit-clustered sandwich variance of the pooled saturated event-study
// coefficient at e: (sum_i sum_g Rt_{i,g}^2)^{-2} * sum_i s_i^2 with
// s_i = sum_g Rt_{i,g} * eps_{i,g}, Rt the cell-constant FWL residual of the
// treatment indicator and eps the residual from the fitted cell mean.
// Per-unit scores are summed across stacks before squaring. Returns the
// variance of tau_hat_e directly (compare against plug-in / n).
double crve_variance(const PanelDataset &ds, const std::vector<Stack> &stacks,
                     int e);

enum class Multiplier { Rademacher, Gaussian };

struct BandPoint {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double v_boot = 0.0;
};

struct BandResult {
  std::map<int, BandPoint> by_event;
  double critical_value = 0.0;
  double alpha = 0.05;
  int B = 0;
  Multiplier multiplier = Multiplier::Rademacher;
  std::uint64_t seed = 0;
};

// Multiplier bootstrap for simultaneous bands. One weight xi_i per unit per
// replication, shared across every stack and event time containing the unit;
//   tau*_e(b) = n_e^{-1} sum_i xi_i(b) phi_i(e),
//   V_boot(e) = B^{-1} sum_b tau*_e(b)^2,
//   c_alpha   = order statistic ceil((1-alpha) B) of max_e |tau*_e|/sqrt(V_boot(e)).
// Replication b depends only on (seed, b); output is identical for any
// n_threads.
BandResult multiplier_bootstrap(
    const std::map<int, AggregatedInfluence> &influence_by_event,
    const std::map<int, double> &estimates_by_event, int B,
    Multiplier multiplier, std::uint64_t seed, double alpha,
    int n_threads = 1);

}  // namespace sddd

#endif  // SDDD_INFERENCE_HPP
