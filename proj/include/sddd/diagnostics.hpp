#ifndef SDDD_DIAGNOSTICS_HPP
#define SDDD_DIAGNOSTICS_HPP

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sddd/estimators.hpp"
#include "sddd/panel.hpp"
#include "sddd/stacks.hpp"

namespace sddd {

// Fixed-effect structure of the pooled event-study regression being
// dissected. HwStyle carries unit, group-by-time, and eligibility-by-time
// effects; Plain3wfe omits the eligibility-by-time set (its time effects are
// nested in group-by-time).
enum class SpecKind { HwStyle, Plain3wfe };

struct PanelObs {
  std::size_t unit = 0;
  int time = 0;
};

// Canonical observation order (unit index ascending, time ascending) that
// every value vector below is aligned to.
std::vector<PanelObs> panel_observations(const PanelDataset &ds);

// Residual after projecting out the spec's fixed effects, computed by
// cycling group-mean subtraction over the margins until the residual stops
// moving (1e-12 on the max change). The one-shot inclusion-exclusion formula
// is the first sweep; iteration makes the result exact on unbalanced panels
// where the margins are not orthogonal.
std::vector<double> demean(const PanelDataset &ds,
                           const std::vector<double> &values, SpecKind spec);

// Aggregate event-time indicator R_e(i,t) = 1{t - S_i = e} Q_i over the
// canonical observation order (zero for never-treated units).
std::vector<double> event_indicator(const PanelDataset &ds, int e);

// Cohort-specific indicator R_{g,l}(i,t) = 1{S_i = g, Q_i = 1, t = g + l}.
std::vector<double> cohort_event_indicator(const PanelDataset &ds, int g,
                                           int ell);

// Implicit weights of the pooled event-study regression: for each cohort row
// (g, l), the coefficients on the included aggregate indicators from the
// auxiliary regression of R_{g,l} on the demeaned R_j.
struct AuxWeightTable {
  SpecKind spec = SpecKind::HwStyle;
  int L = 1;
  int K = 0;
  std::vector<int> included_events;  // j values, ascending, -1 excluded
  // (cohort, l) -> coefficients aligned with included_events. Rows exist for
  // every realized event time of each cohort (including -1 and event times
  // outside the regression window) and for the never-treated cohort, whose
  // rows are identically zero.
  std::map<std::pair<CohortLabel, int>, std::vector<double>> rows;
  std::map<int, double> sigma2;  // j -> partial residual variance

  double omega(const CohortLabel &g, int ell, int j) const;
  std::set<int> cohort_ells(const CohortLabel &g) const;
};

AuxWeightTable aux_weights(const PanelDataset &ds, SpecKind spec, int L,
                           int K);

struct WeightPropertyReport {
  bool own_period_ok = false;       // sum_g omega_{g,j}^j = 1 per j
  bool cross_period_ok = false;     // sum_g omega_{g,l}^j = 0, l included, l != j
  bool excluded_period_ok = false;  // sum_g omega_{g,-1}^j = -1 per j
  bool never_zero_ok = false;       // never-treated rows all zero
  double tol = 1e-10;
  std::vector<std::string> failures;
  // Cohorts whose own-period weight is negative, per j (the contamination
  // flag: a pooled coefficient may then lie outside the convex hull).
  std::map<int, std::vector<int>> negative_own_period;

  bool all_ok() const {
    return own_period_ok && cross_period_ok && excluded_period_ok &&
           never_zero_ok;
  }
};

WeightPropertyReport check_weight_properties(const AuxWeightTable &table,
                                             double tol = 1e-10);

// alpha_j = sum_{g,l != -1} omega_{g,l}^j * catt(g, l). Post-period entries
// (l >= 0) carrying nonzero weight must be present in catt; missing
// pre-period entries are treated as zero (no anticipation).
std::map<int, double> implied_estimand(
    const AuxWeightTable &table,
    const std::map<std::pair<int, int>, double> &catt);

struct AggWeightTable {
  std::map<std::pair<int, int>, double> omega;  // (g, l >= 0) -> Omega
  std::map<int, double> w;                      // j -> aggregation weight
  double omega_sum = 0.0;                       // sum over (g, l >= 0)
  bool normalized = false;                      // |omega_sum - 1| <= 1e-10
  std::vector<std::pair<int, int>> negative_entries;
};

// Omega_{g,l} = sum_j w_j omega_{g,l}^j for l >= 0, with w_j >= 0 summing to
// one over post-period included event times. The normalization sum equals 1
// when the regression window covers every realized post event time.
AggWeightTable aggregated_weights(const AuxWeightTable &table,
                                  const std::map<int, double> &w);

// Event-study coefficients of the pooled regression itself: demeaned least
// squares of the outcome on the included aggregate indicators.
std::map<int, double> pooled_3wfe_event_study(const PanelDataset &ds,
                                              SpecKind spec, int L, int K);

// Cohort-specific estimates from the fully interacted version of the same
// regression (every realized R_{g,l}, l != -1, jointly). These are the
// realized per-(g,l) contrasts through which pooled_3wfe_event_study
// decomposes exactly: alpha_j = sum omega_{g,l}^j * estimate(g,l).
std::map<std::pair<int, int>, double> cohort_event_estimates(
    const PanelDataset &ds, SpecKind spec);

struct PreTrendEntry {
  int g = 0;
  int e = 0;
  double estimate = 0.0;
  double se = 0.0;
};

struct PreTrendReport {
  std::vector<PreTrendEntry> entries;
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

// Joint Wald test that all stacked pre-period coefficients (e < -1; the
// baseline e = -1 is identically zero) vanish. The covariance across (g, e)
// pairs comes from unit-level influence contributions, so stacks sharing
// comparison units are handled the same way as in variance estimation.
PreTrendReport pretrend_test(const PanelDataset &ds,
                             const std::vector<Stack> &stacks);

// Independent-coordinates shortcut: statistic = sum est^2 / var with
// dof = number of coefficients.
PreTrendReport pretrend_test(
    const std::vector<PreTrendEntry> &entries_with_variances);

}  // namespace sddd

#endif  // SDDD_DIAGNOSTICS_HPP
