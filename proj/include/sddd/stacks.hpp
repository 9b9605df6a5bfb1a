#ifndef SDDD_STACKS_HPP
#define SDDD_STACKS_HPP

#include <array>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sddd/panel.hpp"

namespace sddd {

// The four cells of a stack, in the order used throughout: the triple
// difference signs for this ordering are (+1, -1, -1, +1).
enum class CellRole {
  TreatedEligible = 0,
  TreatedIneligible = 1,
  ComparisonEligible = 2,
  ComparisonIneligible = 3,
};

constexpr std::array<CellRole, 4> kCellRoles = {
    CellRole::TreatedEligible, CellRole::TreatedIneligible,
    CellRole::ComparisonEligible, CellRole::ComparisonIneligible};

constexpr std::array<double, 4> kTripleDiffSigns = {+1.0, -1.0, -1.0, +1.0};

const char *cell_role_name(CellRole role);

struct StackSpec {
  int g = 0;                                 // treated cohort
  CohortLabel g_c = CohortLabel::never();    // clean comparison cohort
  int L = 1;                                 // pre-window length
  int K = 0;                                 // post-window length
};

// How the comparison cohort for a stack is chosen.
struct ComparisonRule {
  enum class Kind { PreferNever, EarliestAdmissible, Explicit };
  Kind kind = Kind::PreferNever;
  CohortLabel explicit_gc = CohortLabel::never();

  static ComparisonRule prefer_never() { return {}; }
  static ComparisonRule earliest_admissible() {
    return {Kind::EarliestAdmissible, CohortLabel::never()};
  }
  static ComparisonRule explicit_comparison(CohortLabel g_c) {
    return {Kind::Explicit, g_c};
  }
};

// One cohort's self-contained four-cell sub-experiment. Cell rosters hold
// indexes into the PanelDataset's unit vector; membership is by cohort and
// eligibility only, so a roster never changes across event times (usable
// counts at a given time may be smaller on unbalanced panels).
struct Stack {
  StackSpec spec;
  std::array<std::vector<std::size_t>, 4> cells;

  int baseline() const { return spec.g - 1; }
  const std::vector<std::size_t> &cell(CellRole role) const {
    return cells[static_cast<std::size_t>(role)];
  }
  std::array<int, 4> cell_counts() const {
    return {static_cast<int>(cells[0].size()),
            static_cast<int>(cells[1].size()),
            static_cast<int>(cells[2].size()),
            static_cast<int>(cells[3].size())};
  }
  std::size_t total_units() const {
    return cells[0].size() + cells[1].size() + cells[2].size() +
           cells[3].size();
  }
  // Effective window times after boundary truncation, always containing the
  // baseline g-1 and g itself.
  int window_start(const PanelDataset &ds) const;
  int window_end(const PanelDataset &ds) const;
};

struct StackCollection {
  std::vector<Stack> stacks;
  // Cohorts skipped under on_infeasible=skip, with the reason.
  std::vector<std::pair<int, std::string>> skipped;
};

struct StackedRow {
  int stack_g = 0;
  std::size_t unit_idx = 0;
  int time = 0;
  CellRole role = CellRole::TreatedEligible;
  int event_time = 0;
  double dy = 0.0;
};

// Concatenation of all stacks: one row per (unit, time, stack) with both the
// time and the stack baseline observed. A unit shared across stacks keeps
// one unit id, which is what unit-level clustering relies on.
struct StackedDataset {
  std::vector<StackedRow> rows;
  std::map<std::string, std::set<int>> index;  // unit id -> stacks containing it
};

enum class OnInfeasible { Skip, Error };

// All cohorts admissible as the comparison for cohort g with post-window K:
// finite cohorts strictly beyond g+K plus the never-treated group, each
// required to have both eligibility cells populated (as must cohort g).
std::vector<CohortLabel> admissible_comparisons(const PanelDataset &ds, int g,
                                                int K);

Stack build_stack(const PanelDataset &ds, int g, const ComparisonRule &rule,
                  int L, int K);

StackCollection build_all_stacks(const PanelDataset &ds,
                                 const ComparisonRule &rule, int L, int K,
                                 OnInfeasible on_infeasible);

StackedDataset materialize_stacked(const std::vector<Stack> &stacks,
                                   const PanelDataset &ds);

}  // namespace sddd

#endif  // SDDD_STACKS_HPP
