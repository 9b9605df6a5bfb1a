#include "sddd/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "linalg.hpp"
#include "sddd/inference.hpp"
#include "sddd/stats.hpp"

namespace sddd {

std::vector<PanelObs> panel_observations(const PanelDataset &ds) {
  std::vector<PanelObs> obs;
  for (std::size_t i = 0; i < ds.n_units(); ++i) {
    for (const auto &kv : ds.unit(i).outcomes) {
      obs.push_back({i, kv.first});
    }
  }
  return obs;
}

namespace {

// One demeaning margin: group id per observation.
struct Margin {
  std::vector<int> group;
  int n_groups = 0;
};

int cohort_index(const PanelDataset &ds, const CohortLabel &c) {
  const auto &cs = ds.cohorts();
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (cs[i] == c) return static_cast<int>(i);
  }
  throw LookupError("unknown cohort " + c.to_string());
}

std::vector<Margin> margins_for(const PanelDataset &ds,
                                const std::vector<PanelObs> &obs,
                                SpecKind spec) {
  const int T = ds.t_max();
  const int n_cohorts = static_cast<int>(ds.cohorts().size());
  Margin unit, group_time, elig_time, time_only;
  unit.n_groups = static_cast<int>(ds.n_units());
  group_time.n_groups = n_cohorts * T;
  elig_time.n_groups = 2 * T;
  time_only.n_groups = T;
  unit.group.reserve(obs.size());
  group_time.group.reserve(obs.size());
  elig_time.group.reserve(obs.size());
  time_only.group.reserve(obs.size());
  for (const auto &o : obs) {
    const UnitRecord &u = ds.unit(o.unit);
    const int ci = cohort_index(ds, u.cohort);
    unit.group.push_back(static_cast<int>(o.unit));
    group_time.group.push_back(ci * T + (o.time - 1));
    elig_time.group.push_back((u.eligible ? 1 : 0) * T + (o.time - 1));
    time_only.group.push_back(o.time - 1);
  }
  if (spec == SpecKind::HwStyle) {
    return {unit, group_time, elig_time};
  }
  // time effects are spanned by group-by-time; keeping the margin is a
  // harmless no-op for the projection.
  return {unit, group_time, time_only};
}

double subtract_margin_means(std::vector<double> &r, const Margin &m) {
  std::vector<double> sum(static_cast<std::size_t>(m.n_groups), 0.0);
  std::vector<int> count(static_cast<std::size_t>(m.n_groups), 0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    sum[static_cast<std::size_t>(m.group[i])] += r[i];
    count[static_cast<std::size_t>(m.group[i])] += 1;
  }
  double max_change = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const std::size_t gid = static_cast<std::size_t>(m.group[i]);
    const double mean = sum[gid] / count[gid];
    r[i] -= mean;
    max_change = std::max(max_change, std::fabs(mean));
  }
  return max_change;
}

std::vector<double> demean_with_margins(const std::vector<double> &values,
                                        const std::vector<Margin> &margins) {
  std::vector<double> r = values;
  double scale = 1.0;
  for (double v : values) scale = std::max(scale, std::fabs(v));
  const double tol = 1e-12 * scale;
  const int max_iter = 10000;
  for (int it = 0; it < max_iter; ++it) {
    double change = 0.0;
    for (const Margin &m : margins) {
      change = std::max(change, subtract_margin_means(r, m));
    }
    if (change < tol) return r;
  }
  throw Error("demean: alternating projections did not converge");
}

}  // namespace

std::vector<double> demean(const PanelDataset &ds,
                           const std::vector<double> &values, SpecKind spec) {
  const auto obs = panel_observations(ds);
  if (values.size() != obs.size()) {
    throw ConfigError("demean: values not aligned with panel observations");
  }
  return demean_with_margins(values, margins_for(ds, obs, spec));
}

std::vector<double> event_indicator(const PanelDataset &ds, int e) {
  const auto obs = panel_observations(ds);
  std::vector<double> r(obs.size(), 0.0);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const UnitRecord &u = ds.unit(obs[i].unit);
    if (u.cohort.is_finite() && u.eligible &&
        obs[i].time - u.cohort.time() == e) {
      r[i] = 1.0;
    }
  }
  return r;
}

std::vector<double> cohort_event_indicator(const PanelDataset &ds, int g,
                                           int ell) {
  const auto obs = panel_observations(ds);
  const CohortLabel target = CohortLabel::finite(g);
  std::vector<double> r(obs.size(), 0.0);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const UnitRecord &u = ds.unit(obs[i].unit);
    if (u.cohort == target && u.eligible && obs[i].time == g + ell) {
      r[i] = 1.0;
    }
  }
  return r;
}

double AuxWeightTable::omega(const CohortLabel &g, int ell, int j) const {
  auto it = rows.find({g, ell});
  if (it == rows.end()) return 0.0;
  for (std::size_t k = 0; k < included_events.size(); ++k) {
    if (included_events[k] == j) return it->second[k];
  }
  throw LookupError("omega: event time " + std::to_string(j) +
                    " not included in the regression");
}

std::set<int> AuxWeightTable::cohort_ells(const CohortLabel &g) const {
  std::set<int> out;
  for (const auto &kv : rows) {
    if (kv.first.first == g) out.insert(kv.first.second);
  }
  return out;
}

namespace {

struct AuxDesign {
  std::vector<int> included;             // j values
  std::vector<std::vector<double>> rdd;  // demeaned R_j per included j
  std::vector<double> gram;              // row-major m x m
  std::vector<std::string> labels;
};

AuxDesign build_aux_design(const PanelDataset &ds, SpecKind spec, int L,
                           int K) {
  if (L < 1 || K < 0) throw ConfigError("aux design: need L >= 1, K >= 0");
  AuxDesign d;
  for (int j = -L; j <= K; ++j) {
    if (j != -1) d.included.push_back(j);
  }
  const auto obs = panel_observations(ds);
  const auto margins = margins_for(ds, obs, spec);
  for (int j : d.included) {
    d.rdd.push_back(demean_with_margins(event_indicator(ds, j), margins));
    d.labels.push_back("e=" + std::to_string(j));
  }
  const std::size_t m = d.included.size();
  d.gram.assign(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < d.rdd[a].size(); ++i) {
        s += d.rdd[a][i] * d.rdd[b][i];
      }
      d.gram[a * m + b] = s;
      d.gram[b * m + a] = s;
    }
  }
  return d;
}

// Residual sum of squares of R_j after partialling the other included
// indicators out, from the Gram matrix (Schur complement).
double partial_rss(const AuxDesign &d, std::size_t jj) {
  const std::size_t m = d.included.size();
  if (m == 1) return d.gram[0];
  std::vector<double> sub((m - 1) * (m - 1), 0.0);
  std::vector<double> rhs(m - 1, 0.0);
  std::vector<std::string> labels;
  std::size_t r = 0;
  for (std::size_t a = 0; a < m; ++a) {
    if (a == jj) continue;
    labels.push_back(d.labels[a]);
    rhs[r] = d.gram[a * m + jj];
    std::size_t c = 0;
    for (std::size_t b = 0; b < m; ++b) {
      if (b == jj) continue;
      sub[r * (m - 1) + c] = d.gram[a * m + b];
      ++c;
    }
    ++r;
  }
  const auto gamma = solve_dense(sub, rhs, labels);
  double rss = d.gram[jj * m + jj];
  for (std::size_t a = 0; a < m - 1; ++a) rss -= rhs[a] * gamma[a];
  return rss;
}

}  // namespace

AuxWeightTable aux_weights(const PanelDataset &ds, SpecKind spec, int L,
                           int K) {
  if (ds.treated_cohorts().empty()) {
    throw ConfigError("aux_weights: panel has no treated cohort");
  }
  const AuxDesign d = build_aux_design(ds, spec, L, K);
  const std::size_t m = d.included.size();
  const auto obs = panel_observations(ds);

  AuxWeightTable table;
  table.spec = spec;
  table.L = L;
  table.K = K;
  table.included_events = d.included;

  // Event times realized by any treated cohort; the never-treated rows are
  // defined on the same set and are identically zero.
  std::set<int> all_ells;
  for (int g : ds.treated_cohorts()) {
    for (int t = ds.t_min(); t <= ds.t_max(); ++t) all_ells.insert(t - g);
  }

  for (const auto &cohort : ds.cohorts()) {
    std::set<int> ells;
    if (cohort.is_finite()) {
      for (int t = ds.t_min(); t <= ds.t_max(); ++t) {
        ells.insert(t - cohort.time());
      }
    } else {
      ells = all_ells;
    }
    for (int ell : ells) {
      std::vector<double> b(m, 0.0);
      if (cohort.is_finite()) {
        const auto r_gl = cohort_event_indicator(ds, cohort.time(), ell);
        for (std::size_t a = 0; a < m; ++a) {
          double s = 0.0;
          for (std::size_t i = 0; i < obs.size(); ++i) {
            s += d.rdd[a][i] * r_gl[i];
          }
          b[a] = s;
        }
        table.rows[{cohort, ell}] = solve_dense(d.gram, b, d.labels);
      } else {
        table.rows[{cohort, ell}] = std::vector<double>(m, 0.0);
      }
    }
  }

  const double n_units = static_cast<double>(ds.n_units());
  for (std::size_t jj = 0; jj < m; ++jj) {
    table.sigma2[d.included[jj]] = partial_rss(d, jj) / n_units;
  }
  return table;
}

WeightPropertyReport check_weight_properties(const AuxWeightTable &table,
                                             double tol) {
  WeightPropertyReport report;
  report.tol = tol;
  report.own_period_ok = true;
  report.cross_period_ok = true;
  report.excluded_period_ok = true;
  report.never_zero_ok = true;

  std::set<CohortLabel> treated;
  bool has_never = false;
  for (const auto &kv : table.rows) {
    if (kv.first.first.is_never()) {
      has_never = true;
    } else {
      treated.insert(kv.first.first);
    }
  }

  auto sum_over_cohorts = [&](int ell, int j) {
    double s = 0.0;
    for (const auto &g : treated) s += table.omega(g, ell, j);
    return s;
  };

  for (int j : table.included_events) {
    const double own = sum_over_cohorts(j, j);
    if (std::fabs(own - 1.0) > tol) {
      report.own_period_ok = false;
      report.failures.push_back("own-period sum at j=" + std::to_string(j) +
                                " is " + std::to_string(own));
    }
    for (int ell : table.included_events) {
      if (ell == j) continue;
      const double cross = sum_over_cohorts(ell, j);
      if (std::fabs(cross) > tol) {
        report.cross_period_ok = false;
        report.failures.push_back("cross-period sum at j=" +
                                  std::to_string(j) + ", l=" +
                                  std::to_string(ell) + " is " +
                                  std::to_string(cross));
      }
    }
    const double excluded = sum_over_cohorts(-1, j);
    if (std::fabs(excluded + 1.0) > tol) {
      report.excluded_period_ok = false;
      report.failures.push_back("excluded-period sum at j=" +
                                std::to_string(j) + " is " +
                                std::to_string(excluded));
    }
    for (const auto &g : treated) {
      if (table.omega(g, j, j) < -tol) {
        report.negative_own_period[j].push_back(g.time());
      }
    }
  }

  if (has_never) {
    for (const auto &kv : table.rows) {
      if (!kv.first.first.is_never()) continue;
      for (double v : kv.second) {
        if (std::fabs(v) > tol) {
          report.never_zero_ok = false;
          report.failures.push_back("never-treated row (l=" +
                                    std::to_string(kv.first.second) +
                                    ") is nonzero");
          break;
        }
      }
    }
  }
  return report;
}

std::map<int, double> implied_estimand(
    const AuxWeightTable &table,
    const std::map<std::pair<int, int>, double> &catt) {
  constexpr double kZero = 1e-12;
  std::map<int, double> alpha;
  for (int j : table.included_events) alpha[j] = 0.0;
  for (const auto &kv : table.rows) {
    const CohortLabel &g = kv.first.first;
    const int ell = kv.first.second;
    if (g.is_never() || ell == -1) continue;
    for (std::size_t k = 0; k < table.included_events.size(); ++k) {
      const double w = kv.second[k];
      if (std::fabs(w) <= kZero) continue;
      auto it = catt.find({g.time(), ell});
      double value = 0.0;
      if (it != catt.end()) {
        value = it->second;
      } else if (ell >= 0) {
        throw ConfigError("implied_estimand: missing CATT(" +
                          std::to_string(g.time()) + "," +
                          std::to_string(ell) + ") carrying weight " +
                          std::to_string(w));
      }
      alpha[table.included_events[k]] += w * value;
    }
  }
  return alpha;
}

AggWeightTable aggregated_weights(const AuxWeightTable &table,
                                  const std::map<int, double> &w) {
  double wsum = 0.0;
  for (const auto &kv : w) {
    if (kv.first < 0) {
      throw ConfigError("aggregated_weights: w is defined on post periods");
    }
    if (std::find(table.included_events.begin(), table.included_events.end(),
                  kv.first) == table.included_events.end()) {
      throw ConfigError("aggregated_weights: j=" + std::to_string(kv.first) +
                        " is not an included event time");
    }
    if (kv.second < 0.0) {
      throw ConfigError("aggregated_weights: negative w_j");
    }
    wsum += kv.second;
  }
  if (std::fabs(wsum - 1.0) > 1e-10) {
    throw ConfigError("aggregated_weights: w sums to " + std::to_string(wsum));
  }

  AggWeightTable out;
  out.w = w;
  for (const auto &kv : table.rows) {
    const CohortLabel &g = kv.first.first;
    const int ell = kv.first.second;
    if (g.is_never() || ell < 0) continue;
    double omega = 0.0;
    for (std::size_t k = 0; k < table.included_events.size(); ++k) {
      auto it = w.find(table.included_events[k]);
      if (it != w.end()) omega += it->second * kv.second[k];
    }
    out.omega[{g.time(), ell}] = omega;
    out.omega_sum += omega;
    if (omega < -1e-10) out.negative_entries.push_back({g.time(), ell});
  }
  out.normalized = std::fabs(out.omega_sum - 1.0) <= 1e-10;
  return out;
}

std::map<int, double> pooled_3wfe_event_study(const PanelDataset &ds,
                                              SpecKind spec, int L, int K) {
  const AuxDesign d = build_aux_design(ds, spec, L, K);
  const auto obs = panel_observations(ds);
  const std::size_t m = d.included.size();
  std::vector<double> b(m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    double s = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const auto y = ds.unit(obs[i].unit).outcome(obs[i].time);
      s += d.rdd[a][i] * *y;
    }
    b[a] = s;
  }
  const auto coef = solve_dense(d.gram, b, d.labels);
  std::map<int, double> out;
  for (std::size_t a = 0; a < m; ++a) out[d.included[a]] = coef[a];
  return out;
}

std::map<std::pair<int, int>, double> cohort_event_estimates(
    const PanelDataset &ds, SpecKind spec) {
  const auto obs = panel_observations(ds);
  const auto margins = margins_for(ds, obs, spec);

  // Every realized (g, l) with l != -1 enters jointly.
  std::vector<std::pair<int, int>> keys;
  for (int g : ds.treated_cohorts()) {
    for (int t = ds.t_min(); t <= ds.t_max(); ++t) {
      if (t - g != -1) keys.push_back({g, t - g});
    }
  }
  const std::size_t m = keys.size();
  std::vector<std::vector<double>> rdd(m);
  std::vector<std::string> labels(m);
  for (std::size_t a = 0; a < m; ++a) {
    rdd[a] = demean_with_margins(
        cohort_event_indicator(ds, keys[a].first, keys[a].second), margins);
    labels[a] = "g=" + std::to_string(keys[a].first) +
                ",l=" + std::to_string(keys[a].second);
  }
  std::vector<double> gram(m * m, 0.0);
  std::vector<double> b(m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t c = a; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < obs.size(); ++i) s += rdd[a][i] * rdd[c][i];
      gram[a * m + c] = s;
      gram[c * m + a] = s;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      s += rdd[a][i] * *ds.unit(obs[i].unit).outcome(obs[i].time);
    }
    b[a] = s;
  }
  const auto coef = solve_dense(gram, b, labels);
  std::map<std::pair<int, int>, double> out;
  for (std::size_t a = 0; a < m; ++a) out[keys[a]] = coef[a];
  return out;
}

PreTrendReport pretrend_test(const PanelDataset &ds,
                             const std::vector<Stack> &stacks) {
  struct Pair {
    const Stack *stack;
    int e;
    double estimate;
    double n_g;
    std::map<std::size_t, double> psi;
  };
  std::vector<Pair> pairs;
  for (const Stack &stack : stacks) {
    for (int e = -stack.spec.L; e <= -2; ++e) {
      const int t = stack.spec.g + e;
      if (!stack_feasible_at(ds, stack, t)) continue;
      Pair p;
      p.stack = &stack;
      p.e = e;
      p.estimate = saturated_ols(ds, stack, t).tau_sat;
      const auto counts = usable_cell_counts(ds, stack, t);
      p.n_g = counts[0] + counts[1] + counts[2] + counts[3];
      p.psi = stack_influence(ds, stack, e);
      pairs.push_back(std::move(p));
    }
  }

  PreTrendReport report;
  if (pairs.empty()) return report;

  const std::size_t m = pairs.size();
  std::vector<double> cov(m * m, 0.0);
  std::vector<std::string> labels(m);
  for (std::size_t a = 0; a < m; ++a) {
    labels[a] = "g=" + std::to_string(pairs[a].stack->spec.g) +
                ",e=" + std::to_string(pairs[a].e);
    for (std::size_t b = a; b < m; ++b) {
      double s = 0.0;
      const auto &pa = pairs[a].psi;
      const auto &pb = pairs[b].psi;
      const auto &small = pa.size() <= pb.size() ? pa : pb;
      const auto &large = pa.size() <= pb.size() ? pb : pa;
      for (const auto &kv : small) {
        auto it = large.find(kv.first);
        if (it != large.end()) s += kv.second * it->second;
      }
      const double c = s / (pairs[a].n_g * pairs[b].n_g);
      cov[a * m + b] = c;
      cov[b * m + a] = c;
    }
  }

  bool all_zero = true;
  for (std::size_t a = 0; a < m; ++a) {
    PreTrendEntry entry;
    entry.g = pairs[a].stack->spec.g;
    entry.e = pairs[a].e;
    entry.estimate = pairs[a].estimate;
    entry.se = std::sqrt(std::max(cov[a * m + a], 0.0));
    report.entries.push_back(entry);
    if (std::fabs(entry.estimate) > 1e-12) all_zero = false;
    if (cov[a * m + a] <= 0.0 && std::fabs(entry.estimate) > 1e-12) {
      throw DegenerateError("pretrend_test: zero variance with nonzero "
                            "estimate at " +
                            labels[a]);
    }
  }
  report.dof = static_cast<int>(m);
  if (all_zero) {
    report.statistic = 0.0;
    report.p_value = 1.0;
    return report;
  }

  std::vector<double> theta(m);
  for (std::size_t a = 0; a < m; ++a) theta[a] = pairs[a].estimate;
  std::vector<double> x;
  try {
    x = solve_dense(cov, theta, labels);
  } catch (const CollinearityError &e) {
    throw DegenerateError(std::string("pretrend_test: singular covariance (") +
                          e.what() + ")");
  }
  double stat = 0.0;
  for (std::size_t a = 0; a < m; ++a) stat += theta[a] * x[a];
  report.statistic = std::max(stat, 0.0);
  report.p_value = chi_square_upper_tail(report.statistic, report.dof);
  return report;
}

PreTrendReport pretrend_test(
    const std::vector<PreTrendEntry> &entries_with_variances) {
  PreTrendReport report;
  report.entries = entries_with_variances;
  if (entries_with_variances.empty()) return report;
  double stat = 0.0;
  for (const auto &entry : entries_with_variances) {
    const double var = entry.se * entry.se;
    if (var <= 0.0) {
      if (std::fabs(entry.estimate) > 1e-12) {
        throw DegenerateError("pretrend_test: zero variance with nonzero "
                              "estimate at g=" +
                              std::to_string(entry.g) +
                              ", e=" + std::to_string(entry.e));
      }
      continue;
    }
    stat += entry.estimate * entry.estimate / var;
  }
  report.dof = static_cast<int>(entries_with_variances.size());
  report.statistic = stat;
  report.p_value =
      stat == 0.0 ? 1.0 : chi_square_upper_tail(stat, report.dof);
  return report;
}

}  // namespace sddd
