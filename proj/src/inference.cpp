#include "sddd/inference.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "sddd/rng.hpp"
#include "sddd/stats.hpp"

namespace sddd {

std::map<std::size_t, double> stack_influence(const PanelDataset &ds,
                                              const Stack &stack, int e) {
  const int t = stack.spec.g + e;
  if (!stack_feasible_at(ds, stack, t)) {
    throw InfeasibleError("stack_influence: stack for cohort " +
                          std::to_string(stack.spec.g) +
                          " infeasible at e=" + std::to_string(e));
  }
  const int baseline = stack.baseline();
  const auto counts = usable_cell_counts(ds, stack, t);
  const int n_g = counts[0] + counts[1] + counts[2] + counts[3];

  std::map<std::size_t, double> psi;
  for (std::size_t k = 0; k < 4; ++k) {
    const double mean = cell_mean(ds, stack.cells[k], t, baseline).mean;
    const double pi = static_cast<double>(counts[k]) / n_g;
    const double scale = kTripleDiffSigns[k] / pi;
    for (std::size_t idx : stack.cells[k]) {
      const auto dy = long_difference(ds, idx, t, baseline);
      if (!dy) continue;
      psi[idx] = scale * (*dy - mean);
    }
  }
  return psi;
}

AggregatedInfluence aggregated_influence(const PanelDataset &ds,
                                         const std::vector<Stack> &stacks,
                                         const std::map<int, double> &weights,
                                         int e) {
  double wsum = 0.0;
  for (const auto &kv : weights) {
    if (kv.second < 0.0) {
      throw WeightError("aggregated_influence: negative weight for cohort " +
                        std::to_string(kv.first));
    }
    wsum += kv.second;
  }
  if (std::fabs(wsum - 1.0) > 1e-8) {
    throw WeightError("aggregated_influence: weights sum to " +
                      std::to_string(wsum) + ", expected 1");
  }

  // Distinct units across the stacks carrying weight at e.
  std::set<std::size_t> members;
  std::vector<const Stack *> active;
  std::set<int> matched;
  for (const Stack &stack : stacks) {
    if (weights.count(stack.spec.g) == 0) continue;
    matched.insert(stack.spec.g);
    active.push_back(&stack);
    for (const auto &cell : stack.cells) {
      members.insert(cell.begin(), cell.end());
    }
  }
  for (const auto &kv : weights) {
    if (matched.count(kv.first) == 0) {
      throw WeightError("aggregated_influence: weight for cohort " +
                        std::to_string(kv.first) + " matches no stack");
    }
  }
  if (members.empty()) {
    throw WeightError("aggregated_influence: no stack carries weight at e=" +
                      std::to_string(e));
  }

  AggregatedInfluence out;
  out.units.assign(members.begin(), members.end());
  out.n = static_cast<int>(out.units.size());
  out.phi.assign(out.units.size(), 0.0);

  std::map<std::size_t, std::size_t> pos;
  for (std::size_t i = 0; i < out.units.size(); ++i) pos[out.units[i]] = i;

  const double n = static_cast<double>(out.n);
  for (const Stack *stack : active) {
    const double w = weights.at(stack->spec.g);
    if (w == 0.0) continue;
    const auto counts = usable_cell_counts(ds, *stack, stack->spec.g + e);
    const double n_g = counts[0] + counts[1] + counts[2] + counts[3];
    const auto psi = stack_influence(ds, *stack, e);
    const double scale = n * w / n_g;
    for (const auto &kv : psi) {
      out.phi[pos.at(kv.first)] += scale * kv.second;
    }
  }
  return out;
}

double plugin_variance(const std::vector<double> &phi, int n) {
  if (n <= 0) throw DegenerateError("plugin_variance: n must be positive");
  double sum = 0.0;
  for (double p : phi) sum += p * p;
  return sum / static_cast<double>(n);
}

double plugin_variance(const AggregatedInfluence &infl) {
  return plugin_variance(infl.phi, infl.n);
}

std::pair<double, double> pointwise_ci(double estimate, double v, int n,
                                       double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("pointwise_ci: alpha must lie in (0,1)");
  }
  if (v < 0.0) throw ConfigError("pointwise_ci: negative variance");
  if (n <= 0) throw ConfigError("pointwise_ci: n must be positive");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double half = z * std::sqrt(v / static_cast<double>(n));
  return {estimate - half, estimate + half};
}

namespace {

// Within-cell sums of squared deviations of usable long differences.
std::array<double, 4> cell_ssr(const PanelDataset &ds, const Stack &stack,
                               int t) {
  const int baseline = stack.baseline();
  std::array<double, 4> ssr = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < 4; ++k) {
    const double mean = cell_mean(ds, stack.cells[k], t, baseline).mean;
    for (std::size_t idx : stack.cells[k]) {
      const auto dy = long_difference(ds, idx, t, baseline);
      if (!dy) continue;
      const double r = *dy - mean;
      ssr[k] += r * r;
    }
  }
  return ssr;
}

}  // namespace

double stack_sigma2(const PanelDataset &ds, const Stack &stack, int e) {
  const int t = stack.spec.g + e;
  if (!stack_feasible_at(ds, stack, t)) {
    throw InfeasibleError("stack_sigma2: infeasible event time " +
                          std::to_string(e));
  }
  const auto counts = usable_cell_counts(ds, stack, t);
  const double n_g = counts[0] + counts[1] + counts[2] + counts[3];
  const auto ssr = cell_ssr(ds, stack, t);
  double sigma2 = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const double s2 = ssr[k] / counts[k];
    sigma2 += s2 / (counts[k] / n_g);
  }
  return sigma2;
}

double stack_estimate_variance(const PanelDataset &ds, const Stack &stack,
                               int e) {
  const int t = stack.spec.g + e;
  if (!stack_feasible_at(ds, stack, t)) {
    throw InfeasibleError("stack_estimate_variance: infeasible event time " +
                          std::to_string(e));
  }
  const auto counts = usable_cell_counts(ds, stack, t);
  const auto ssr = cell_ssr(ds, stack, t);
  double v = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    v += ssr[k] / counts[k] / counts[k];
  }
  return v;
}

std::map<int, std::map<int, double>> estimate_variances_by_event(
    const PanelDataset &ds, const std::vector<Stack> &stacks) {
  std::map<int, std::map<int, double>> out;
  for (const Stack &stack : stacks) {
    for (int e = -stack.spec.L; e <= stack.spec.K; ++e) {
      if (e == -1) continue;
      if (!stack_feasible_at(ds, stack, stack.spec.g + e)) continue;
      out[e][stack.spec.g] = stack_estimate_variance(ds, stack, e);
    }
  }
  return out;
}

double crve_variance(const PanelDataset &ds, const std::vector<Stack> &stacks,
                     int e) {
  // Unit-level scores summed across stacks, then squared.
  std::map<std::size_t, double> score;
  double bread = 0.0;
  bool any = false;
  for (const Stack &stack : stacks) {
    const int t = stack.spec.g + e;
    if (!stack_feasible_at(ds, stack, t)) continue;
    any = true;
    const int baseline = stack.baseline();
    const auto counts = usable_cell_counts(ds, stack, t);
    // Cell-constant FWL residual of the treatment indicator: the treated-
    // eligible value c makes the residual orthogonal to the stack's group,
    // eligibility, and constant columns, with pattern sign * n_g1 / n_cell.
    double inv = 0.0;
    for (int c : counts) inv += 1.0 / static_cast<double>(c);
    const double c_val = 1.0 / (counts[0] * inv);
    for (std::size_t k = 0; k < 4; ++k) {
      const double r_tilde =
          kTripleDiffSigns[k] * c_val * counts[0] / counts[k];
      const double mean = cell_mean(ds, stack.cells[k], t, baseline).mean;
      for (std::size_t idx : stack.cells[k]) {
        const auto dy = long_difference(ds, idx, t, baseline);
        if (!dy) continue;
        score[idx] += r_tilde * (*dy - mean);
        bread += r_tilde * r_tilde;
      }
    }
  }
  if (!any) {
    throw InfeasibleError("crve_variance: no stack feasible at e=" +
                          std::to_string(e));
  }
  double meat = 0.0;
  for (const auto &kv : score) meat += kv.second * kv.second;
  return meat / (bread * bread);
}

namespace {

struct BootstrapPlan {
  std::vector<std::size_t> all_units;          // union across event times
  std::vector<int> events;                     // event times, ascending
  std::vector<std::vector<double>> phi;        // [event][all_units] padded
  std::vector<double> inv_n;                   // [event] 1/n_e
};

BootstrapPlan make_plan(
    const std::map<int, AggregatedInfluence> &influence_by_event) {
  BootstrapPlan plan;
  std::set<std::size_t> all;
  for (const auto &kv : influence_by_event) {
    plan.events.push_back(kv.first);
    all.insert(kv.second.units.begin(), kv.second.units.end());
  }
  plan.all_units.assign(all.begin(), all.end());
  std::map<std::size_t, std::size_t> pos;
  for (std::size_t i = 0; i < plan.all_units.size(); ++i) {
    pos[plan.all_units[i]] = i;
  }
  for (int e : plan.events) {
    const AggregatedInfluence &infl = influence_by_event.at(e);
    std::vector<double> padded(plan.all_units.size(), 0.0);
    for (std::size_t i = 0; i < infl.units.size(); ++i) {
      padded[pos.at(infl.units[i])] = infl.phi[i];
    }
    plan.phi.push_back(std::move(padded));
    plan.inv_n.push_back(1.0 / static_cast<double>(infl.n));
  }
  return plan;
}

// One replication: draws xi in fixed unit order from its own stream, so the
// result depends only on (seed, b).
void run_replication(const BootstrapPlan &plan, Multiplier multiplier,
                     std::uint64_t seed, int b, double *tau_star_row) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
  const std::size_t n_events = plan.events.size();
  for (std::size_t j = 0; j < n_events; ++j) tau_star_row[j] = 0.0;
  for (std::size_t i = 0; i < plan.all_units.size(); ++i) {
    const double xi = (multiplier == Multiplier::Rademacher) ? rng.rademacher()
                                                             : rng.normal();
    for (std::size_t j = 0; j < n_events; ++j) {
      tau_star_row[j] += xi * plan.phi[j][i];
    }
  }
  for (std::size_t j = 0; j < n_events; ++j) tau_star_row[j] *= plan.inv_n[j];
}

}  // namespace

BandResult multiplier_bootstrap(
    const std::map<int, AggregatedInfluence> &influence_by_event,
    const std::map<int, double> &estimates_by_event, int B,
    Multiplier multiplier, std::uint64_t seed, double alpha, int n_threads) {
  if (B < 1) throw ConfigError("multiplier_bootstrap: B must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("multiplier_bootstrap: alpha must lie in (0,1)");
  }
  if (influence_by_event.empty()) {
    throw ConfigError("multiplier_bootstrap: no event times");
  }
  for (const auto &kv : influence_by_event) {
    if (estimates_by_event.count(kv.first) == 0) {
      throw ConfigError("multiplier_bootstrap: no estimate for e=" +
                        std::to_string(kv.first));
    }
  }

  const BootstrapPlan plan = make_plan(influence_by_event);
  const std::size_t n_events = plan.events.size();
  std::vector<double> tau_star(static_cast<std::size_t>(B) * n_events, 0.0);

  const int workers = std::max(1, n_threads);
  if (workers == 1) {
    for (int b = 0; b < B; ++b) {
      run_replication(plan, multiplier, seed, b,
                      tau_star.data() + static_cast<std::size_t>(b) * n_events);
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (int b = w; b < B; b += workers) {
          run_replication(
              plan, multiplier, seed, b,
              tau_star.data() + static_cast<std::size_t>(b) * n_events);
        }
      });
    }
    for (auto &th : pool) th.join();
  }

  std::vector<double> v_boot(n_events, 0.0);
  for (int b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < n_events; ++j) {
      const double t = tau_star[static_cast<std::size_t>(b) * n_events + j];
      v_boot[j] += t * t;
    }
  }
  for (auto &v : v_boot) v /= static_cast<double>(B);

  const bool all_degenerate =
      std::all_of(v_boot.begin(), v_boot.end(),
                  [](double v) { return v == 0.0; });
  if (!all_degenerate) {
    for (std::size_t j = 0; j < n_events; ++j) {
      if (v_boot[j] == 0.0) {
        throw DegenerateError(
            "multiplier_bootstrap: degenerate bootstrap variance at e=" +
            std::to_string(plan.events[j]));
      }
    }
  }

  double c_alpha = 0.0;
  if (!all_degenerate) {
    std::vector<double> max_stats(static_cast<std::size_t>(B), 0.0);
    for (int b = 0; b < B; ++b) {
      double m = 0.0;
      for (std::size_t j = 0; j < n_events; ++j) {
        const double t = tau_star[static_cast<std::size_t>(b) * n_events + j];
        m = std::max(m, std::fabs(t) / std::sqrt(v_boot[j]));
      }
      max_stats[static_cast<std::size_t>(b)] = m;
    }
    std::sort(max_stats.begin(), max_stats.end());
    // Order statistic at ceil((1-alpha) * B), 1-based.
    int rank = static_cast<int>(
        std::ceil((1.0 - alpha) * static_cast<double>(B)));
    rank = std::min(std::max(rank, 1), B);
    c_alpha = max_stats[static_cast<std::size_t>(rank - 1)];
  }

  BandResult out;
  out.critical_value = c_alpha;
  out.alpha = alpha;
  out.B = B;
  out.multiplier = multiplier;
  out.seed = seed;
  for (std::size_t j = 0; j < n_events; ++j) {
    BandPoint point;
    point.estimate = estimates_by_event.at(plan.events[j]);
    point.v_boot = v_boot[j];
    const double half = c_alpha * std::sqrt(v_boot[j]);
    point.lower = point.estimate - half;
    point.upper = point.estimate + half;
    out.by_event.emplace(plan.events[j], point);
  }
  return out;
}

}  // namespace sddd
