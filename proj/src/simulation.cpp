#include "sddd/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sddd/inference.hpp"
#include "sddd/rng.hpp"

namespace sddd {

double DgpConfig::eligible_share_for(const CohortLabel &c) const {
  const int key = c.is_never() ? 0 : c.time();
  auto it = eligible_share.find(key);
  if (it != eligible_share.end()) return it->second;
  it = eligible_share.find(0);
  if (it != eligible_share.end()) return it->second;
  throw ConfigError("DgpConfig: no eligible share for cohort " +
                    c.to_string());
}

void DgpConfig::check() const {
  if (n_units < 4) throw ConfigError("DgpConfig: need at least 4 units");
  if (T < 2) throw ConfigError("DgpConfig: need T >= 2");
  if (cohorts.empty()) throw ConfigError("DgpConfig: no treated cohorts");
  double total = never_share;
  if (never_share < 0.0) throw ConfigError("DgpConfig: negative never share");
  for (const auto &kv : cohorts) {
    if (kv.first < 2 || kv.first > T) {
      throw ConfigError("DgpConfig: cohort " + std::to_string(kv.first) +
                        " outside {2,...,T}");
    }
    if (!(kv.second > 0.0)) {
      throw ConfigError("DgpConfig: cohort shares must be positive");
    }
    total += kv.second;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw ConfigError("DgpConfig: shares sum to " + std::to_string(total));
  }
  if (noise_sd < 0.0) throw ConfigError("DgpConfig: negative noise_sd");
  if (!catt) throw ConfigError("DgpConfig: catt function not set");
  for (const auto &kv : cohorts) {
    const double p = eligible_share_for(CohortLabel::finite(kv.first));
    if (!(p > 0.0 && p < 1.0)) {
      throw ConfigError("DgpConfig: eligible share must lie in (0,1)");
    }
  }
}

namespace {

// Largest-remainder apportionment of n into the given shares; deterministic,
// so cell counts are identical across Monte Carlo replications.
std::vector<int> apportion(int n, const std::vector<double> &shares) {
  const std::size_t k = shares.size();
  std::vector<int> counts(k, 0);
  std::vector<std::pair<double, std::size_t>> rema(k);
  int assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double quota = shares[i] * n;
    counts[i] = static_cast<int>(std::floor(quota));
    assigned += counts[i];
    rema[i] = {quota - std::floor(quota), i};
  }
  std::sort(rema.begin(), rema.end(), [](const auto &a, const auto &b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int r = 0; r < n - assigned; ++r) {
    counts[rema[static_cast<std::size_t>(r)].second] += 1;
  }
  return counts;
}

}  // namespace

PanelDataset simulate_panel(const DgpConfig &cfg) {
  cfg.check();

  std::vector<CohortLabel> groups;
  std::vector<double> shares;
  for (const auto &kv : cfg.cohorts) {
    groups.push_back(CohortLabel::finite(kv.first));
    shares.push_back(kv.second);
  }
  if (cfg.never_share > 0.0) {
    groups.push_back(CohortLabel::never());
    shares.push_back(cfg.never_share);
  }
  const auto counts = apportion(cfg.n_units, shares);

  std::vector<UnitRecord> units;
  units.reserve(static_cast<std::size_t>(cfg.n_units));
  std::size_t unit_index = 0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const int n_c = counts[gi];
    if (n_c < 2) {
      throw ConfigError("simulate_panel: cohort " + groups[gi].to_string() +
                        " receives fewer than 2 units");
    }
    const double p = cfg.eligible_share_for(groups[gi]);
    int n_eligible = apportion(n_c, {p, 1.0 - p})[0];
    n_eligible = std::min(std::max(n_eligible, 1), n_c - 1);

    for (int u = 0; u < n_c; ++u) {
      UnitRecord rec;
      char buf[24];
      std::snprintf(buf, sizeof(buf), "u%05zu", unit_index);
      rec.unit_id = buf;
      rec.cohort = groups[gi];
      rec.eligible = u < n_eligible;

      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(unit_index)));
      const double alpha = rng.normal();
      for (int t = 1; t <= cfg.T; ++t) {
        double y = alpha;
        if (cfg.group_time_trend) y += cfg.group_time_trend(rec.cohort, t);
        if (cfg.eligibility_time_trend) {
          y += cfg.eligibility_time_trend(rec.eligible, t);
        }
        if (cfg.violation) y += cfg.violation(rec.cohort, rec.eligible, t);
        if (rec.cohort.is_finite() && rec.eligible &&
            t >= rec.cohort.time()) {
          y += cfg.catt(rec.cohort.time(), t - rec.cohort.time());
        }
        const double eps = rng.normal();
        if (cfg.noise_sd > 0.0) y += cfg.noise_sd * eps;
        rec.outcomes[t] = y;
      }
      units.push_back(std::move(rec));
      ++unit_index;
    }
  }

  std::vector<long long> calendar(static_cast<std::size_t>(cfg.T));
  std::iota(calendar.begin(), calendar.end(), 1);
  return PanelDataset(std::move(units), std::move(calendar));
}

double true_catt(const DgpConfig &cfg, int g, int e) {
  const bool known =
      std::any_of(cfg.cohorts.begin(), cfg.cohorts.end(),
                  [g](const auto &kv) { return kv.first == g; });
  if (!known) {
    throw LookupError("true_catt: cohort " + std::to_string(g) +
                      " not configured");
  }
  if (e < 0) return 0.0;
  return cfg.catt(g, e);
}

namespace {

struct RepOutcome {
  // (e) -> estimate/target/se/covered for one estimator in one replication.
  std::map<int, std::array<double, 3>> by_event;  // est, target, se
  std::map<int, bool> covered;
  bool has_ci = false;
};

RepOutcome run_stacked(const PanelDataset &ds, const DgpConfig &cfg,
                       const EstimatorSpec &spec) {
  RepOutcome out;
  out.has_ci = true;
  const auto built =
      build_all_stacks(ds, spec.rule, spec.L, spec.K, OnInfeasible::Skip);
  if (built.stacks.empty()) {
    throw InfeasibleError("no feasible stack in replication");
  }

  // Precision weighting needs per-stack estimate variances up front.
  std::map<int, std::map<int, double>> variances_by_e;
  if (spec.scheme.kind == WeightScheme::Kind::Precision) {
    variances_by_e = estimate_variances_by_event(ds, built.stacks);
  }

  const EventStudyResult result = event_study(
      ds, built.stacks, spec.scheme,
      variances_by_e.empty() ? nullptr : &variances_by_e);
  for (const auto &kv : result.by_event) {
    const int e = kv.first;
    double target = 0.0;
    for (const auto &wg : kv.second.weights_used) {
      target += wg.second * true_catt(cfg, wg.first, e);
    }
    const AggregatedInfluence infl = aggregated_influence(
        ds, built.stacks, kv.second.weights_used, e);
    const double v = plugin_variance(infl);
    const auto ci = pointwise_ci(kv.second.estimate, v, infl.n, spec.alpha);
    out.by_event[e] = {kv.second.estimate, target,
                       std::sqrt(v / static_cast<double>(infl.n))};
    out.covered[e] = target >= ci.first && target <= ci.second;
  }
  return out;
}

RepOutcome run_pooled(const PanelDataset &ds, const DgpConfig &cfg,
                      const EstimatorSpec &spec) {
  RepOutcome out;
  const SpecKind kind = spec.kind == EstimatorSpec::Kind::PooledHw
                            ? SpecKind::HwStyle
                            : SpecKind::Plain3wfe;
  const auto alpha_hat = pooled_3wfe_event_study(ds, kind, spec.L, spec.K);

  // Target: cohort-size-weighted true effect over cohorts observed at e,
  // using treated-eligible counts.
  std::map<int, double> n_g1;
  for (const auto &u : ds.units()) {
    if (u.cohort.is_finite() && u.eligible) n_g1[u.cohort.time()] += 1.0;
  }
  for (const auto &kv : alpha_hat) {
    const int e = kv.first;
    double target = 0.0;
    if (e >= 0) {
      double total = 0.0;
      for (const auto &gn : n_g1) {
        if (gn.first + e <= ds.t_max()) total += gn.second;
      }
      for (const auto &gn : n_g1) {
        if (gn.first + e <= ds.t_max()) {
          target += gn.second / total * true_catt(cfg, gn.first, e);
        }
      }
    }
    out.by_event[e] = {kv.second, target, 0.0};
  }
  return out;
}

}  // namespace

McSummary monte_carlo(const DgpConfig &cfg,
                      const std::vector<EstimatorSpec> &specs, int reps) {
  if (reps < 1) throw ConfigError("monte_carlo: reps must be >= 1");
  McSummary summary;
  summary.reps = reps;

  struct Accum {
    double sum_bias = 0.0;
    double sum_sq = 0.0;
    double sum_se = 0.0;
    double sum_est = 0.0;
    double sum_target = 0.0;
    int covered = 0;
    int used = 0;
  };
  std::map<std::pair<std::string, int>, Accum> acc;

  for (int b = 0; b < reps; ++b) {
    DgpConfig rep_cfg = cfg;
    rep_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(b));
    const PanelDataset ds = simulate_panel(rep_cfg);
    for (const auto &spec : specs) {
      RepOutcome out;
      try {
        out = spec.kind == EstimatorSpec::Kind::Stacked
                  ? run_stacked(ds, cfg, spec)
                  : run_pooled(ds, cfg, spec);
      } catch (const Error &) {
        summary.failures[spec.label] += 1;
        continue;
      }
      for (const auto &kv : out.by_event) {
        Accum &cell = acc[{spec.label, kv.first}];
        const double est = kv.second[0];
        const double target = kv.second[1];
        cell.sum_bias += est - target;
        cell.sum_sq += (est - target) * (est - target);
        cell.sum_se += kv.second[2];
        cell.sum_est += est;
        cell.sum_target += target;
        if (out.has_ci && out.covered.at(kv.first)) cell.covered += 1;
        cell.used += 1;
      }
    }
  }

  for (const auto &kv : acc) {
    McCell cell;
    const double n = kv.second.used;
    cell.mean_bias = kv.second.sum_bias / n;
    cell.rmse = std::sqrt(kv.second.sum_sq / n);
    cell.coverage_95 = kv.second.covered / n;
    cell.mean_se = kv.second.sum_se / n;
    cell.mean_estimate = kv.second.sum_est / n;
    cell.target = kv.second.sum_target / n;
    cell.reps_used = kv.second.used;
    summary.cells[kv.first] = cell;
  }
  return summary;
}

}  // namespace sddd
