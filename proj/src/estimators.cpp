#include "sddd/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sddd {

const char *WeightScheme::name() const {
  switch (kind) {
    case Kind::Fwl:
      return "fwl";
    case Kind::CohortSize:
      return "cohort_size";
    case Kind::Equal:
      return "equal";
    case Kind::Precision:
      return "precision";
    case Kind::Custom:
      return "custom";
  }
  return "?";
}

std::array<int, 4> usable_cell_counts(const PanelDataset &ds,
                                      const Stack &stack, int t) {
  std::array<int, 4> counts = {0, 0, 0, 0};
  const int baseline = stack.baseline();
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t idx : stack.cells[k]) {
      const UnitRecord &u = ds.unit(idx);
      if (u.observes(t) && u.observes(baseline)) counts[k] += 1;
    }
  }
  return counts;
}

bool stack_feasible_at(const PanelDataset &ds, const Stack &stack, int t) {
  if (t < stack.window_start(ds) || t > stack.window_end(ds)) return false;
  const auto counts = usable_cell_counts(ds, stack, t);
  return counts[0] > 0 && counts[1] > 0 && counts[2] > 0 && counts[3] > 0;
}

SaturatedCoefficients saturated_ols(const PanelDataset &ds, const Stack &stack,
                                    int t) {
  const int baseline = stack.baseline();
  std::array<CellMean, 4> means;
  for (std::size_t k = 0; k < 4; ++k) {
    means[k] = cell_mean(ds, stack.cells[k], t, baseline);
  }
  SaturatedCoefficients out;
  const double m_g1 = means[0].mean;
  const double m_g0 = means[1].mean;
  const double m_c1 = means[2].mean;
  const double m_c0 = means[3].mean;
  out.mu = m_c0;
  out.lambda = m_g0 - m_c0;
  out.eta = m_c1 - m_c0;
  out.tau_sat = (m_g1 - m_g0) - (m_c1 - m_c0);
  for (std::size_t k = 0; k < 4; ++k) out.cell_counts[k] = means[k].count;
  return out;
}

StackAttTable stack_event_study(const PanelDataset &ds, const Stack &stack) {
  StackAttTable table;
  table.g = stack.spec.g;
  table.g_c = stack.spec.g_c;
  table.L = stack.spec.L;
  table.K = stack.spec.K;
  for (int e = -stack.spec.L; e <= stack.spec.K; ++e) {
    const int t = stack.spec.g + e;
    AttEntry entry;
    if (stack_feasible_at(ds, stack, t)) {
      const auto coef = saturated_ols(ds, stack, t);
      // dy at the baseline period is identically zero, so the triple
      // difference there is exactly zero; store it that way rather than
      // trusting floating-point cancellation.
      entry.estimate = (e == -1) ? 0.0 : coef.tau_sat;
      entry.cell_counts = coef.cell_counts;
      entry.feasible = true;
    }
    table.by_event.emplace(e, entry);
  }
  return table;
}

double fwl_cell_variance(const std::array<int, 4> &counts) {
  double inv = 0.0;
  for (int c : counts) {
    if (c <= 0) return 0.0;
    inv += 1.0 / static_cast<double>(c);
  }
  return 1.0 / inv;
}

std::map<int, double> fwl_weights(const PanelDataset &ds,
                                  const std::vector<Stack> &stacks, int e) {
  std::map<int, double> v;
  double total = 0.0;
  for (const Stack &stack : stacks) {
    const int t = stack.spec.g + e;
    if (!stack_feasible_at(ds, stack, t)) continue;
    const double vg = fwl_cell_variance(usable_cell_counts(ds, stack, t));
    v[stack.spec.g] = vg;
    total += vg;
  }
  if (v.empty() || total <= 0.0) {
    throw WeightError("fwl_weights: no stack feasible at e=" +
                      std::to_string(e));
  }
  for (auto &kv : v) kv.second /= total;
  return v;
}

AggregateResult aggregate(const std::vector<StackAttTable> &tables,
                          const WeightScheme &scheme, int e,
                          const std::map<int, double> *estimate_variances,
                          const std::map<int, double> *fwl) {
  // Feasible cohorts at e, with their estimates and treated-eligible counts.
  std::map<int, const AttEntry *> feasible;
  for (const auto &table : tables) {
    const AttEntry *entry = table.entry(e);
    if (entry && entry->feasible) feasible[table.g] = entry;
  }
  if (feasible.empty()) {
    throw WeightError("aggregate: no cohort feasible at e=" +
                      std::to_string(e));
  }

  std::map<int, double> w;
  switch (scheme.kind) {
    case WeightScheme::Kind::CohortSize: {
      double total = 0.0;
      for (const auto &kv : feasible) {
        w[kv.first] = static_cast<double>(kv.second->cell_counts[0]);
        total += w[kv.first];
      }
      for (auto &kv : w) kv.second /= total;
      break;
    }
    case WeightScheme::Kind::Equal: {
      const double share = 1.0 / static_cast<double>(feasible.size());
      for (const auto &kv : feasible) w[kv.first] = share;
      break;
    }
    case WeightScheme::Kind::Precision: {
      if (estimate_variances == nullptr) {
        throw WeightError(
            "aggregate: precision weights need per-stack variances");
      }
      double total = 0.0;
      for (const auto &kv : feasible) {
        auto it = estimate_variances->find(kv.first);
        if (it == estimate_variances->end() || !(it->second > 0.0)) {
          throw WeightError("aggregate: missing or nonpositive variance for "
                            "cohort " +
                            std::to_string(kv.first));
        }
        w[kv.first] = 1.0 / it->second;
        total += w[kv.first];
      }
      for (auto &kv : w) kv.second /= total;
      break;
    }
    case WeightScheme::Kind::Custom: {
      double total = 0.0;
      for (const auto &kv : feasible) {
        auto it = scheme.custom.find(kv.first);
        if (it == scheme.custom.end()) {
          throw WeightError("aggregate: no custom weight for cohort " +
                            std::to_string(kv.first));
        }
        if (!(it->second > 0.0)) {
          throw WeightError("aggregate: custom weight for cohort " +
                            std::to_string(kv.first) + " must be > 0");
        }
        w[kv.first] = it->second;
        total += it->second;
      }
      for (auto &kv : w) kv.second /= total;
      break;
    }
    case WeightScheme::Kind::Fwl: {
      if (fwl == nullptr) {
        throw WeightError("aggregate: FWL scheme needs precomputed weights");
      }
      for (const auto &kv : feasible) {
        auto it = fwl->find(kv.first);
        if (it == fwl->end()) {
          throw WeightError("aggregate: missing FWL weight for cohort " +
                            std::to_string(kv.first));
        }
        w[kv.first] = it->second;
      }
      break;
    }
  }

  AggregateResult out;
  out.weights_used = w;
  for (const auto &kv : w) {
    out.estimate += kv.second * feasible.at(kv.first)->estimate;
  }
  return out;
}

std::map<int, double> pooled_event_study(const PanelDataset &ds,
                                         const std::vector<Stack> &stacks) {
  if (stacks.empty()) throw ConfigError("pooled_event_study: no stacks");
  int L = 0, K = 0;
  for (const Stack &s : stacks) {
    L = std::max(L, s.spec.L);
    K = std::max(K, s.spec.K);
  }
  std::map<int, double> out;
  for (int e = -L; e <= K; ++e) {
    if (e == -1) continue;
    double num = 0.0, den = 0.0;
    for (const Stack &stack : stacks) {
      const int t = stack.spec.g + e;
      if (e < -stack.spec.L || e > stack.spec.K) continue;
      if (!stack_feasible_at(ds, stack, t)) continue;
      const double vg = fwl_cell_variance(usable_cell_counts(ds, stack, t));
      num += vg * saturated_ols(ds, stack, t).tau_sat;
      den += vg;
    }
    if (den > 0.0) out[e] = num / den;
  }
  return out;
}

EventStudyResult event_study(
    const PanelDataset &ds, const std::vector<Stack> &stacks,
    const WeightScheme &scheme,
    const std::map<int, std::map<int, double>> *estimate_variances_by_e) {
  if (stacks.empty()) throw ConfigError("event_study: no stacks");
  EventStudyResult result;
  result.scheme = scheme;
  std::vector<StackAttTable> tables;
  tables.reserve(stacks.size());
  for (const Stack &s : stacks) {
    tables.push_back(stack_event_study(ds, s));
    result.L = std::max(result.L, s.spec.L);
    result.K = std::max(result.K, s.spec.K);
  }

  for (int e = -result.L; e <= result.K; ++e) {
    if (e == -1) continue;
    bool any = false;
    for (const auto &t : tables) {
      const AttEntry *entry = t.entry(e);
      if (entry && entry->feasible) any = true;
    }
    if (!any) continue;

    std::map<int, double> fwl;
    const std::map<int, double> *fwl_ptr = nullptr;
    if (scheme.kind == WeightScheme::Kind::Fwl) {
      fwl = fwl_weights(ds, stacks, e);
      fwl_ptr = &fwl;
    }
    const std::map<int, double> *var_ptr = nullptr;
    if (estimate_variances_by_e != nullptr) {
      auto it = estimate_variances_by_e->find(e);
      if (it != estimate_variances_by_e->end()) var_ptr = &it->second;
    }
    const AggregateResult agg = aggregate(tables, scheme, e, var_ptr, fwl_ptr);

    EventStudyPoint point;
    point.estimate = agg.estimate;
    point.weights_used = agg.weights_used;
    std::set<std::size_t> uniq;
    for (const Stack &stack : stacks) {
      if (agg.weights_used.count(stack.spec.g) == 0) continue;
      for (const auto &cell : stack.cells) {
        uniq.insert(cell.begin(), cell.end());
      }
    }
    point.n_effective = static_cast<int>(uniq.size());
    result.by_event.emplace(e, point);
  }
  return result;
}

}  // namespace sddd
