#include <doctest.h>

#include "sddd/stacks.hpp"
#include "support.hpp"

using namespace sddd;

namespace {

PanelDataset three_cohort_panel(int T = 6) {
  return testing::make_grid_panel(
      {{CohortLabel::finite(2), {2, 2}},
       {CohortLabel::finite(5), {2, 2}},
       {CohortLabel::never(), {2, 2}}},
      T, [](const CohortLabel &, bool, int u, int t) {
        return 0.1 * t + 0.01 * u;
      });
}

}  // namespace

TEST_CASE("admissible_comparisons applies the strict horizon rule") {
  const PanelDataset ds = three_cohort_panel();
  SUBCASE("never and late cohorts admissible for the early cohort") {
    const auto cs = admissible_comparisons(ds, 2, 1);
    REQUIRE(cs.size() == 2);
    CHECK(cs[0] == CohortLabel::finite(5));  // 5 > 2+1
    CHECK(cs[1].is_never());
  }
  SUBCASE("boundary is strict") {
    // g=2, K=3: cohort 5 fails 5 > 5.
    const auto cs = admissible_comparisons(ds, 2, 3);
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].is_never());
  }
  SUBCASE("no admissible comparison without never-treated") {
    const PanelDataset two = testing::make_grid_panel(
        {{CohortLabel::finite(2), {2, 2}}, {CohortLabel::finite(3), {2, 2}}},
        4, [](const CohortLabel &, bool, int, int) { return 0.0; });
    CHECK(admissible_comparisons(two, 2, 1).empty());
  }
}

TEST_CASE("admissible_comparisons requires both eligibility cells") {
  // Never-treated pool with no ineligible units is excluded.
  using testing::UnitSpec;
  std::vector<UnitSpec> specs;
  auto add = [&](const std::string &id, CohortLabel c, bool q) {
    UnitSpec s;
    s.id = id;
    s.cohort = c;
    s.eligible = q;
    for (int t = 1; t <= 4; ++t) s.outcomes[t] = 0.0;
    specs.push_back(s);
  };
  add("a", CohortLabel::finite(2), true);
  add("b", CohortLabel::finite(2), false);
  add("c", CohortLabel::never(), true);
  add("d", CohortLabel::never(), true);
  add("e", CohortLabel::finite(4), true);
  add("f", CohortLabel::finite(4), false);
  const PanelDataset ds = testing::make_panel(specs, 4);
  const auto cs = admissible_comparisons(ds, 2, 1);
  REQUIRE(cs.size() == 1);
  CHECK(cs[0] == CohortLabel::finite(4));
}

TEST_CASE("build_stack fills the four cells") {
  const PanelDataset ds = three_cohort_panel();
  const Stack stack =
      build_stack(ds, 2, ComparisonRule::prefer_never(), 1, 1);
  CHECK(stack.spec.g == 2);
  CHECK(stack.spec.g_c.is_never());
  CHECK(stack.baseline() == 1);
  CHECK(stack.window_start(ds) == 1);
  CHECK(stack.window_end(ds) == 3);
  const auto counts = stack.cell_counts();
  CHECK(counts == std::array<int, 4>{2, 2, 2, 2});
  // Cells are disjoint and cover cohorts g and g_c only.
  std::set<std::size_t> seen;
  for (const auto &cell : stack.cells) {
    for (auto idx : cell) CHECK(seen.insert(idx).second);
  }
  CHECK(seen.size() == stack.total_units());
  for (std::size_t idx : stack.cell(CellRole::TreatedEligible)) {
    CHECK(ds.unit(idx).cohort == CohortLabel::finite(2));
    CHECK(ds.unit(idx).eligible);
  }
}

TEST_CASE("build_stack comparison rules") {
  const PanelDataset ds = three_cohort_panel();
  SUBCASE("prefer_never picks never when admissible") {
    CHECK(build_stack(ds, 2, ComparisonRule::prefer_never(), 1, 0)
              .spec.g_c.is_never());
  }
  SUBCASE("earliest_admissible picks the smallest clean finite cohort") {
    const Stack s =
        build_stack(ds, 2, ComparisonRule::earliest_admissible(), 1, 0);
    CHECK(s.spec.g_c == CohortLabel::finite(5));
  }
  SUBCASE("explicit comparison is validated") {
    CHECK(build_stack(ds, 2,
                      ComparisonRule::explicit_comparison(CohortLabel::finite(5)),
                      1, 1)
              .spec.g_c == CohortLabel::finite(5));
    // 5 <= 2+3 fails the strict inequality.
    CHECK_THROWS_AS(
        build_stack(ds, 2,
                    ComparisonRule::explicit_comparison(CohortLabel::finite(5)),
                    1, 3),
        InfeasibleError);
  }
  SUBCASE("no baseline period is a window error") {
    const PanelDataset early = testing::make_grid_panel(
        {{CohortLabel::finite(1), {2, 2}}, {CohortLabel::never(), {2, 2}}}, 4,
        [](const CohortLabel &, bool, int, int) { return 0.0; });
    CHECK_THROWS_AS(build_stack(early, 1, ComparisonRule::prefer_never(), 1, 0),
                    WindowError);
  }
}

TEST_CASE("build_all_stacks skips or errors on infeasible cohorts") {
  const PanelDataset ds = testing::make_grid_panel(
      {{CohortLabel::finite(2), {2, 2}}, {CohortLabel::finite(3), {2, 2}}}, 4,
      [](const CohortLabel &, bool, int, int) { return 0.0; });
  SUBCASE("skip") {
    const StackCollection out = build_all_stacks(
        ds, ComparisonRule::prefer_never(), 1, 0, OnInfeasible::Skip);
    REQUIRE(out.stacks.size() == 1);
    CHECK(out.stacks[0].spec.g == 2);
    CHECK(out.stacks[0].spec.g_c == CohortLabel::finite(3));
    REQUIRE(out.skipped.size() == 1);
    CHECK(out.skipped[0].first == 3);
  }
  SUBCASE("error") {
    CHECK_THROWS_AS(build_all_stacks(ds, ComparisonRule::prefer_never(), 1, 0,
                                     OnInfeasible::Error),
                    InfeasibleError);
  }
}

TEST_CASE("build_all_stacks covers every treated cohort with never present") {
  const PanelDataset ds = three_cohort_panel();
  const StackCollection out = build_all_stacks(
      ds, ComparisonRule::prefer_never(), 1, 1, OnInfeasible::Skip);
  CHECK(out.stacks.size() == 2);
  CHECK(out.skipped.empty());
  // Determinism: same inputs, same construction.
  const StackCollection again = build_all_stacks(
      ds, ComparisonRule::prefer_never(), 1, 1, OnInfeasible::Skip);
  REQUIRE(again.stacks.size() == out.stacks.size());
  for (std::size_t i = 0; i < out.stacks.size(); ++i) {
    CHECK(again.stacks[i].spec.g == out.stacks[i].spec.g);
    CHECK(again.stacks[i].cells == out.stacks[i].cells);
  }
}

TEST_CASE("build_all_stacks on a panel with no treated cohort is empty") {
  const PanelDataset ds = testing::make_grid_panel(
      {{CohortLabel::never(), {3, 3}}}, 4,
      [](const CohortLabel &, bool, int, int t) { return 0.5 * t; });
  const StackCollection out = build_all_stacks(
      ds, ComparisonRule::prefer_never(), 1, 0, OnInfeasible::Skip);
  CHECK(out.stacks.empty());
  CHECK(out.skipped.empty());
}

TEST_CASE("no comparison unit is treated inside the stack window") {
  const PanelDataset ds = three_cohort_panel();
  for (const Stack &stack : build_all_stacks(ds, ComparisonRule::earliest_admissible(),
                                             2, 1, OnInfeasible::Skip)
                                .stacks) {
    if (!stack.spec.g_c.is_finite()) continue;
    CHECK(stack.spec.g_c.time() > stack.window_end(ds));
  }
}

TEST_CASE("materialize_stacked emits one row per usable unit-time-stack") {
  const PanelDataset ds = three_cohort_panel();
  const StackCollection built = build_all_stacks(
      ds, ComparisonRule::prefer_never(), 2, 1, OnInfeasible::Skip);
  const StackedDataset stacked = materialize_stacked(built.stacks, ds);

  // Stack g=2 window truncates to [1,3] (3 times); stack g=5 spans [3,6]
  // (4 times); 8 units each.
  CHECK(stacked.rows.size() == 8 * 3 + 8 * 4);
  // Shared never-treated units appear in both stacks under one id.
  int shared = 0;
  for (const auto &kv : stacked.index) {
    if (kv.second.size() == 2) ++shared;
  }
  CHECK(shared == 4);  // the four never-treated units
  for (const auto &row : stacked.rows) {
    CHECK(row.event_time == row.time - row.stack_g);
    if (row.time == row.stack_g - 1) CHECK(row.dy == 0.0);
  }
}

TEST_CASE("materialize_stacked drops units missing the baseline") {
  using testing::UnitSpec;
  std::vector<UnitSpec> specs;
  auto add = [&](const std::string &id, CohortLabel c, bool q, bool full) {
    UnitSpec s;
    s.id = id;
    s.cohort = c;
    s.eligible = q;
    for (int t = 1; t <= 3; ++t) {
      if (!full && t == 1) continue;  // missing baseline for g=2
      s.outcomes[t] = 1.0 * t;
    }
    specs.push_back(s);
  };
  add("a", CohortLabel::finite(2), true, true);
  add("a2", CohortLabel::finite(2), true, false);
  add("b", CohortLabel::finite(2), false, true);
  add("c", CohortLabel::never(), true, true);
  add("d", CohortLabel::never(), false, true);
  const PanelDataset ds = testing::make_panel(specs, 3);
  const Stack stack = build_stack(ds, 2, ComparisonRule::prefer_never(), 1, 1);
  const StackedDataset stacked = materialize_stacked({stack}, ds);
  for (const auto &row : stacked.rows) {
    CHECK(ds.unit(row.unit_idx).unit_id != "a2");
  }
  CHECK(stacked.index.count("a2") == 0);
}
