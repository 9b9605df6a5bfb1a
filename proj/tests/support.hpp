#ifndef SDDD_TESTS_SUPPORT_HPP
#define SDDD_TESTS_SUPPORT_HPP

// Test-only helpers: a generic normal-equations least-squares oracle kept
// independent of the library's closed-form estimators, and small panel
// builders shared across test files.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sddd/panel.hpp"
#include "sddd/rng.hpp"

// Absolute-tolerance check; doctest's Approx is relative-only.
#define CHECK_ABS(a, b, tol) CHECK(std::fabs((a) - (b)) <= (tol))
#define REQUIRE_ABS(a, b, tol) REQUIRE(std::fabs((a) - (b)) <= (tol))

namespace sddd::testing {

// Dense least squares via normal equations with partial-pivot Gaussian
// elimination. Requires a full-rank design; the callers construct
// non-redundant parameterizations.
inline std::vector<double> least_squares(
    const std::vector<std::vector<double>> &columns,
    const std::vector<double> &y) {
  const std::size_t m = columns.size();
  for (const auto &c : columns) {
    if (c.size() != y.size()) throw std::runtime_error("ls: ragged design");
  }
  std::vector<double> a(m * m, 0.0);
  std::vector<double> b(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < y.size(); ++r) s += columns[i][r] * columns[j][r];
      a[i * m + j] = s;
      a[j * m + i] = s;
    }
    double s = 0.0;
    for (std::size_t r = 0; r < y.size(); ++r) s += columns[i][r] * y[r];
    b[i] = s;
  }
  // Gaussian elimination with partial pivoting.
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t p = k;
    for (std::size_t r = k + 1; r < m; ++r) {
      if (std::fabs(a[perm[r] * m + k]) > std::fabs(a[perm[p] * m + k])) p = r;
    }
    std::swap(perm[k], perm[p]);
    const double akk = a[perm[k] * m + k];
    if (std::fabs(akk) < 1e-12) throw std::runtime_error("ls: singular design");
    for (std::size_t r = k + 1; r < m; ++r) {
      const double f = a[perm[r] * m + k] / akk;
      for (std::size_t c = k; c < m; ++c) a[perm[r] * m + c] -= f * a[perm[k] * m + c];
      b[perm[r]] -= f * b[perm[k]];
    }
  }
  std::vector<double> x(m, 0.0);
  for (std::size_t k = m; k-- > 0;) {
    double s = b[perm[k]];
    for (std::size_t c = k + 1; c < m; ++c) s -= a[perm[k] * m + c] * x[c];
    x[k] = s / a[perm[k] * m + k];
  }
  return x;
}

struct UnitSpec {
  std::string id;
  CohortLabel cohort = CohortLabel::never();
  bool eligible = false;
  std::map<int, double> outcomes;
};

inline PanelDataset make_panel(const std::vector<UnitSpec> &specs, int T) {
  std::vector<UnitRecord> units;
  for (const auto &s : specs) {
    UnitRecord u;
    u.unit_id = s.id;
    u.cohort = s.cohort;
    u.eligible = s.eligible;
    u.outcomes = s.outcomes;
    units.push_back(std::move(u));
  }
  std::vector<long long> calendar(static_cast<std::size_t>(T));
  std::iota(calendar.begin(), calendar.end(), 1);
  return PanelDataset(std::move(units), std::move(calendar));
}

// Balanced panel with the given cell layout: counts[cohort][eligible] units,
// outcomes from the supplied function y(cohort, eligible, unit_in_cell, t).
template <typename F>
PanelDataset make_grid_panel(
    const std::vector<std::pair<CohortLabel, std::pair<int, int>>> &layout,
    int T, F &&y) {
  std::vector<UnitSpec> specs;
  int uid = 0;
  for (const auto &cell : layout) {
    const CohortLabel cohort = cell.first;
    for (int q = 1; q >= 0; --q) {
      const int n = q == 1 ? cell.second.first : cell.second.second;
      for (int u = 0; u < n; ++u) {
        UnitSpec s;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "u%04d", uid++);
        s.id = buf;
        s.cohort = cohort;
        s.eligible = q == 1;
        for (int t = 1; t <= T; ++t) {
          s.outcomes[t] = y(cohort, q == 1, u, t);
        }
        specs.push_back(std::move(s));
      }
    }
  }
  return make_panel(specs, T);
}

// Randomized staggered panel for property tests: 2-3 treated cohorts plus an
// optional never-treated pool, independent cell sizes, linear group and
// eligibility trends plus unit effects and noise. Deterministic in rng.
struct RandomPanelOptions {
  int min_cell = 4;
  int max_cell = 40;
  int min_T = 4;
  int max_T = 10;
  bool force_never = false;
  double missing_rate = 0.0;  // drop non-baseline observations at this rate
};

inline PanelDataset random_panel(Rng &rng, const RandomPanelOptions &opt = {}) {
  const int T = opt.min_T + static_cast<int>(rng.uniform() *
                                             (opt.max_T - opt.min_T + 1));
  const int n_cohorts = 2 + static_cast<int>(rng.uniform() * 2.0);  // 2 or 3
  std::vector<int> gs;
  while (static_cast<int>(gs.size()) < n_cohorts) {
    const int g = 2 + static_cast<int>(rng.uniform() * (T - 1));
    if (g <= T && std::find(gs.begin(), gs.end(), g) == gs.end()) {
      gs.push_back(g);
    }
  }
  std::sort(gs.begin(), gs.end());
  const bool with_never = opt.force_never || rng.uniform() < 0.8;

  auto cell_n = [&]() {
    return opt.min_cell +
           static_cast<int>(rng.uniform() * (opt.max_cell - opt.min_cell + 1));
  };

  std::vector<std::pair<CohortLabel, std::pair<int, int>>> layout;
  for (int g : gs) {
    layout.push_back({CohortLabel::finite(g), {cell_n(), cell_n()}});
  }
  if (with_never) {
    layout.push_back({CohortLabel::never(), {cell_n(), cell_n()}});
  }

  // Per-cohort slopes and per-unit effects drawn up front so make_grid_panel
  // can evaluate outcomes lazily.
  std::map<std::string, double> cohort_slope;
  for (const auto &cell : layout) {
    cohort_slope[cell.first.to_string()] = 0.5 * rng.normal();
  }
  const double elig_slope = 0.5 * rng.normal();
  const std::uint64_t noise_seed = rng.next_u64();

  PanelDataset full = make_grid_panel(
      layout, T, [&, noise_seed](const CohortLabel &c, bool q, int u, int t) {
        Rng local(derive_seed(
            noise_seed, static_cast<std::uint64_t>(u * 131 + t) * 2654435761ULL +
                            (q ? 1 : 0) +
                            7919ULL * static_cast<std::uint64_t>(
                                          c.is_never() ? 99 : c.time())));
        double y =
            cohort_slope.at(c.to_string()) * t + (q ? elig_slope * t : 0.0);
        y += local.normal();
        if (c.is_finite() && q && t >= c.time()) {
          y += 1.0 + 0.3 * (t - c.time());
        }
        return y;
      });
  if (opt.missing_rate <= 0.0) return full;

  // Unbalance the panel by dropping observations, keeping every cohort's
  // baseline period intact so stacks stay feasible.
  std::set<int> baselines;
  for (int g : full.treated_cohorts()) baselines.insert(g - 1);
  std::vector<UnitRecord> units;
  for (const auto &u : full.units()) {
    UnitRecord copy = u;
    for (auto it = copy.outcomes.begin(); it != copy.outcomes.end();) {
      if (baselines.count(it->first) == 0 && rng.uniform() < opt.missing_rate) {
        it = copy.outcomes.erase(it);
      } else {
        ++it;
      }
    }
    if (!copy.outcomes.empty()) units.push_back(std::move(copy));
  }
  return PanelDataset(std::move(units), full.calendar_times());
}

}  // namespace sddd::testing

#endif  // SDDD_TESTS_SUPPORT_HPP
