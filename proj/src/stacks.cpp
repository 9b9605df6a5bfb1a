#include "sddd/stacks.hpp"

#include <algorithm>

namespace sddd {

const char *cell_role_name(CellRole role) {
  switch (role) {
    case CellRole::TreatedEligible:
      return "treated_eligible";
    case CellRole::TreatedIneligible:
      return "treated_ineligible";
    case CellRole::ComparisonEligible:
      return "comparison_eligible";
    case CellRole::ComparisonIneligible:
      return "comparison_ineligible";
  }
  return "?";
}

int Stack::window_start(const PanelDataset &ds) const {
  return std::max(spec.g - spec.L, ds.t_min());
}

int Stack::window_end(const PanelDataset &ds) const {
  return std::min(spec.g + spec.K, ds.t_max());
}

namespace {

// Cell population counts by (cohort, eligible) over the whole panel.
std::map<std::pair<CohortLabel, bool>, int> cohort_cell_counts(
    const PanelDataset &ds) {
  std::map<std::pair<CohortLabel, bool>, int> counts;
  for (const auto &u : ds.units()) counts[{u.cohort, u.eligible}] += 1;
  return counts;
}

bool both_cells_populated(
    const std::map<std::pair<CohortLabel, bool>, int> &counts,
    const CohortLabel &c) {
  auto it0 = counts.find({c, false});
  auto it1 = counts.find({c, true});
  return it0 != counts.end() && it0->second > 0 && it1 != counts.end() &&
         it1->second > 0;
}

}  // namespace

std::vector<CohortLabel> admissible_comparisons(const PanelDataset &ds, int g,
                                                int K) {
  const auto counts = cohort_cell_counts(ds);
  std::vector<CohortLabel> out;
  if (!both_cells_populated(counts, CohortLabel::finite(g))) return out;
  for (const auto &c : ds.cohorts()) {
    if (c.is_finite()) {
      if (c.time() <= g + K) continue;  // strict: g_c > g + K
    }
    if (c == CohortLabel::finite(g)) continue;
    if (both_cells_populated(counts, c)) out.push_back(c);
  }
  return out;
}

Stack build_stack(const PanelDataset &ds, int g, const ComparisonRule &rule,
                  int L, int K) {
  if (L < 1 || K < 0) throw ConfigError("build_stack: need L >= 1 and K >= 0");
  const bool cohort_present =
      std::find(ds.treated_cohorts().begin(), ds.treated_cohorts().end(), g) !=
      ds.treated_cohorts().end();
  if (!cohort_present) {
    throw LookupError("build_stack: cohort " + std::to_string(g) +
                      " not present in panel");
  }
  // The baseline g-1 must exist; the rest of the window is truncated to the
  // panel's range.
  if (g - 1 < ds.t_min()) {
    throw WindowError("build_stack: cohort " + std::to_string(g) +
                      " has no baseline period " + std::to_string(g - 1));
  }

  const auto admissible = admissible_comparisons(ds, g, K);
  CohortLabel g_c = CohortLabel::never();
  bool chosen = false;
  switch (rule.kind) {
    case ComparisonRule::Kind::PreferNever: {
      for (const auto &c : admissible) {
        if (c.is_never()) {
          g_c = c;
          chosen = true;
          break;
        }
      }
      if (!chosen && !admissible.empty()) {
        g_c = admissible.front();  // smallest finite candidate
        chosen = true;
      }
      break;
    }
    case ComparisonRule::Kind::EarliestAdmissible: {
      for (const auto &c : admissible) {
        if (c.is_finite()) {
          g_c = c;
          chosen = true;
          break;
        }
      }
      if (!chosen && !admissible.empty() && admissible.back().is_never()) {
        g_c = admissible.back();
        chosen = true;
      }
      break;
    }
    case ComparisonRule::Kind::Explicit: {
      for (const auto &c : admissible) {
        if (c == rule.explicit_gc) {
          g_c = c;
          chosen = true;
          break;
        }
      }
      if (!chosen) {
        throw InfeasibleError("build_stack: explicit comparison " +
                              rule.explicit_gc.to_string() +
                              " is not admissible for cohort " +
                              std::to_string(g) + " with K=" +
                              std::to_string(K));
      }
      break;
    }
  }
  if (!chosen) {
    throw InfeasibleError("build_stack: no admissible comparison for cohort " +
                          std::to_string(g) + " with K=" + std::to_string(K));
  }

  Stack stack;
  stack.spec = {g, g_c, L, K};
  const CohortLabel treated = CohortLabel::finite(g);
  for (std::size_t i = 0; i < ds.n_units(); ++i) {
    const UnitRecord &u = ds.unit(i);
    if (u.cohort == treated) {
      stack.cells[u.eligible ? 0 : 1].push_back(i);
    } else if (u.cohort == g_c) {
      stack.cells[u.eligible ? 2 : 3].push_back(i);
    }
  }
  for (std::size_t k = 0; k < 4; ++k) {
    if (stack.cells[k].empty()) {
      throw EmptyCellError("build_stack: empty cell " +
                           std::string(cell_role_name(kCellRoles[k])) +
                           " in stack for cohort " + std::to_string(g));
    }
  }
  return stack;
}

StackCollection build_all_stacks(const PanelDataset &ds,
                                 const ComparisonRule &rule, int L, int K,
                                 OnInfeasible on_infeasible) {
  StackCollection out;
  for (int g : ds.treated_cohorts()) {
    try {
      out.stacks.push_back(build_stack(ds, g, rule, L, K));
    } catch (const Error &e) {
      if (on_infeasible == OnInfeasible::Error) {
        throw InfeasibleError("build_all_stacks: cohort " + std::to_string(g) +
                              " infeasible: " + e.what());
      }
      out.skipped.emplace_back(g, e.what());
    }
  }
  return out;
}

StackedDataset materialize_stacked(const std::vector<Stack> &stacks,
                                   const PanelDataset &ds) {
  if (stacks.empty()) throw ConfigError("materialize_stacked: no stacks");
  StackedDataset out;
  for (const Stack &stack : stacks) {
    const int g = stack.spec.g;
    const int baseline = stack.baseline();
    const int t0 = stack.window_start(ds);
    const int t1 = stack.window_end(ds);
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t idx : stack.cells[k]) {
        const UnitRecord &u = ds.unit(idx);
        bool any = false;
        for (int t = t0; t <= t1; ++t) {
          const auto dy = long_difference(ds, idx, t, baseline);
          if (!dy) continue;
          out.rows.push_back(
              {g, idx, t, kCellRoles[k], t - g, *dy});
          any = true;
        }
        if (any) out.index[u.unit_id].insert(g);
      }
    }
  }
  return out;
}

}  // namespace sddd
