#ifndef SDDD_ESTIMATORS_HPP
#define SDDD_ESTIMATORS_HPP

#include <array>
#include <map>
#include <optional>
#include <vector>

#include "sddd/stacks.hpp"

namespace sddd {

// Coefficients of the fully saturated within-stack regression of long
// differences on {1, group, eligibility, group x eligibility} at one time.
// They reconstruct the four usable cell means exactly:
//   mu                          = comparison-ineligible mean
//   mu + lambda                 = treated-ineligible mean
//   mu + eta                    = comparison-eligible mean
//   mu + lambda + eta + tau_sat = treated-eligible mean
struct SaturatedCoefficients {
  double mu = 0.0;
  double lambda = 0.0;
  double eta = 0.0;
  double tau_sat = 0.0;
  std::array<int, 4> cell_counts = {0, 0, 0, 0};  // usable counts, role order
};

struct AttEntry {
  double estimate = 0.0;
  std::array<int, 4> cell_counts = {0, 0, 0, 0};
  bool feasible = false;
};

// Per-stack triple-difference estimates over the event window, including
// pre-periods. The entry at e = -1 is identically zero by the baseline
// normalization.
struct StackAttTable {
  int g = 0;
  CohortLabel g_c = CohortLabel::never();
  int L = 1;
  int K = 0;
  std::map<int, AttEntry> by_event;

  const AttEntry *entry(int e) const {
    auto it = by_event.find(e);
    return it == by_event.end() ? nullptr : &it->second;
  }
};

struct WeightScheme {
  enum class Kind { Fwl, CohortSize, Equal, Precision, Custom };
  Kind kind = Kind::CohortSize;
  std::map<int, double> custom;  // cohort -> v_g > 0, for Kind::Custom

  static WeightScheme fwl() { return {Kind::Fwl, {}}; }
  static WeightScheme cohort_size() { return {Kind::CohortSize, {}}; }
  static WeightScheme equal() { return {Kind::Equal, {}}; }
  static WeightScheme precision() { return {Kind::Precision, {}}; }
  static WeightScheme custom_weights(std::map<int, double> v) {
    return {Kind::Custom, std::move(v)};
  }
  const char *name() const;
};

struct EventStudyPoint {
  double estimate = 0.0;
  std::map<int, double> weights_used;  // cohort -> realized weight
  int n_effective = 0;  // distinct units across the stacks feasible at e
};

struct EventStudyResult {
  std::map<int, EventStudyPoint> by_event;  // e = -1 excluded
  WeightScheme scheme;
  int L = 1;
  int K = 0;
};

// Usable cell counts at (t, baseline): units with both periods observed.
std::array<int, 4> usable_cell_counts(const PanelDataset &ds,
                                      const Stack &stack, int t);

// True when t lies in the stack's effective window and all four cells have
// at least one usable unit at t.
bool stack_feasible_at(const PanelDataset &ds, const Stack &stack, int t);

// Closed-form saturated OLS at time t (no linear solver involved).
SaturatedCoefficients saturated_ols(const PanelDataset &ds, const Stack &stack,
                                    int t);

// Triple differences for every event time in [-L, K]; entries whose time
// falls outside the panel or with an empty usable cell carry feasible=false.
StackAttTable stack_event_study(const PanelDataset &ds, const Stack &stack);

// Harmonic-cell-count FWL weights at event time e across the given stacks:
//   V_{g,e} = (1/n_g1 + 1/n_g0 + 1/n_gc1 + 1/n_gc0)^{-1},
//   w_g = V_{g,e} / sum_g' V_{g',e},
// using each stack's usable counts at t = g + e.
std::map<int, double> fwl_weights(const PanelDataset &ds,
                                  const std::vector<Stack> &stacks, int e);

// Residual variance V_{g,e} for a single stack (unnormalized FWL weight).
double fwl_cell_variance(const std::array<int, 4> &counts);

struct AggregateResult {
  double estimate = 0.0;
  std::map<int, double> weights_used;
};

// Weighted combination of per-stack estimates at event time e. Precision
// weighting needs the per-stack estimate variances (cohort -> Var of the
// stack estimate at e); other schemes ignore that argument.
AggregateResult aggregate(
    const std::vector<StackAttTable> &tables, const WeightScheme &scheme,
    int e, const std::map<int, double> *estimate_variances = nullptr,
    const std::map<int, double> *fwl = nullptr);

// Event-study coefficients of the fully saturated stacked regression,
// computed as the FWL-weighted average of within-stack triple differences.
// Numerically identical to solving the stacked least-squares problem.
std::map<int, double> pooled_event_study(const PanelDataset &ds,
                                         const std::vector<Stack> &stacks);

// Full pipeline: per-stack tables, then aggregation at every e in
// [-L, K] \ {-1} with realized weights recorded.
EventStudyResult event_study(
    const PanelDataset &ds, const std::vector<Stack> &stacks,
    const WeightScheme &scheme,
    const std::map<int, std::map<int, double>> *estimate_variances_by_e =
        nullptr);

}  // namespace sddd

#endif  // SDDD_ESTIMATORS_HPP
