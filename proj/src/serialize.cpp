#include "sddd/serialize.hpp"

#include <cstdio>
#include <fstream>

namespace sddd {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Json to_json(const ValidationReport &report) {
  Json cells = Json::array();
  for (const auto &c : report.cell_counts) {
    cells.push_back({{"cohort", c.cohort.to_string()},
                     {"eligible", c.eligible ? 1 : 0},
                     {"count", c.count}});
  }
  Json violations = Json::array();
  for (const auto &v : report.violations) {
    violations.push_back({{"kind", v.kind}, {"message", v.message}});
  }
  return {{"overlap_ok", report.overlap_ok},
          {"cell_counts", cells},
          {"violations", violations}};
}

Json stack_roster_json(const std::vector<Stack> &stacks,
                       const PanelDataset &ds) {
  Json out = Json::array();
  for (const auto &stack : stacks) {
    Json cells;
    for (std::size_t k = 0; k < 4; ++k) {
      Json ids = Json::array();
      for (std::size_t idx : stack.cells[k]) {
        ids.push_back(ds.unit(idx).unit_id);
      }
      cells[cell_role_name(kCellRoles[k])] = ids;
    }
    out.push_back({{"g", stack.spec.g},
                   {"comparison", stack.spec.g_c.to_string()},
                   {"baseline", stack.baseline()},
                   {"L", stack.spec.L},
                   {"K", stack.spec.K},
                   {"window", {stack.window_start(ds), stack.window_end(ds)}},
                   {"cells", cells}});
  }
  return out;
}

Json to_json(const StackAttTable &table) {
  Json entries = Json::array();
  for (const auto &kv : table.by_event) {
    entries.push_back({{"e", kv.first},
                       {"estimate", kv.second.estimate},
                       {"feasible", kv.second.feasible},
                       {"n_g1", kv.second.cell_counts[0]},
                       {"n_g0", kv.second.cell_counts[1]},
                       {"ngc1", kv.second.cell_counts[2]},
                       {"ngc0", kv.second.cell_counts[3]}});
  }
  return {{"g", table.g},
          {"comparison", table.g_c.to_string()},
          {"L", table.L},
          {"K", table.K},
          {"entries", entries}};
}

Json to_json(const EventStudyResult &result) {
  Json points = Json::array();
  for (const auto &kv : result.by_event) {
    Json weights;
    for (const auto &w : kv.second.weights_used) {
      weights[std::to_string(w.first)] = w.second;
    }
    points.push_back({{"e", kv.first},
                      {"estimate", kv.second.estimate},
                      {"weights", weights},
                      {"n_effective", kv.second.n_effective}});
  }
  return {{"scheme", result.scheme.name()},
          {"window", {{"L", result.L}, {"K", result.K}}},
          {"points", points}};
}

Json to_json(const BandResult &band) {
  Json points = Json::array();
  for (const auto &kv : band.by_event) {
    points.push_back({{"e", kv.first},
                      {"estimate", kv.second.estimate},
                      {"lower", kv.second.lower},
                      {"upper", kv.second.upper},
                      {"v_boot", kv.second.v_boot}});
  }
  return {{"critical_value", band.critical_value},
          {"alpha", band.alpha},
          {"B", band.B},
          {"multiplier", band.multiplier == Multiplier::Rademacher
                             ? "rademacher"
                             : "gaussian"},
          {"seed", band.seed},
          {"points", points}};
}

Json to_json(const AuxWeightTable &table) {
  Json rows = Json::array();
  for (const auto &kv : table.rows) {
    Json omegas;
    for (std::size_t k = 0; k < table.included_events.size(); ++k) {
      omegas[std::to_string(table.included_events[k])] = kv.second[k];
    }
    rows.push_back({{"cohort", kv.first.first.to_string()},
                    {"ell", kv.first.second},
                    {"omega", omegas}});
  }
  Json sigma2;
  for (const auto &kv : table.sigma2) {
    sigma2[std::to_string(kv.first)] = kv.second;
  }
  return {{"spec", table.spec == SpecKind::HwStyle ? "hw_style" : "plain_3wfe"},
          {"L", table.L},
          {"K", table.K},
          {"included_events", table.included_events},
          {"rows", rows},
          {"sigma2", sigma2}};
}

Json to_json(const AggWeightTable &table) {
  Json rows = Json::array();
  for (const auto &kv : table.omega) {
    rows.push_back({{"g", kv.first.first},
                    {"ell", kv.first.second},
                    {"omega", kv.second}});
  }
  Json w;
  for (const auto &kv : table.w) w[std::to_string(kv.first)] = kv.second;
  Json negatives = Json::array();
  for (const auto &kv : table.negative_entries) {
    negatives.push_back({{"g", kv.first}, {"ell", kv.second}});
  }
  return {{"rows", rows},
          {"w", w},
          {"omega_sum", table.omega_sum},
          {"normalized", table.normalized},
          {"negative_entries", negatives}};
}

Json to_json(const WeightPropertyReport &report) {
  Json negatives;
  for (const auto &kv : report.negative_own_period) {
    negatives[std::to_string(kv.first)] = kv.second;
  }
  return {{"own_period_ok", report.own_period_ok},
          {"cross_period_ok", report.cross_period_ok},
          {"excluded_period_ok", report.excluded_period_ok},
          {"never_zero_ok", report.never_zero_ok},
          {"all_ok", report.all_ok()},
          {"tol", report.tol},
          {"failures", report.failures},
          {"negative_own_period", negatives}};
}

Json to_json(const PreTrendReport &report) {
  Json entries = Json::array();
  for (const auto &entry : report.entries) {
    entries.push_back({{"g", entry.g},
                       {"e", entry.e},
                       {"estimate", entry.estimate},
                       {"se", entry.se}});
  }
  return {{"entries", entries},
          {"statistic", report.statistic},
          {"dof", report.dof},
          {"p_value", report.p_value}};
}

Json to_json(const McSummary &summary) {
  Json cells = Json::array();
  for (const auto &kv : summary.cells) {
    cells.push_back({{"estimator", kv.first.first},
                     {"e", kv.first.second},
                     {"mean_bias", kv.second.mean_bias},
                     {"rmse", kv.second.rmse},
                     {"coverage_95", kv.second.coverage_95},
                     {"mean_se", kv.second.mean_se},
                     {"mean_estimate", kv.second.mean_estimate},
                     {"target", kv.second.target},
                     {"reps_used", kv.second.reps_used}});
  }
  Json failures;
  for (const auto &kv : summary.failures) failures[kv.first] = kv.second;
  return {{"reps", summary.reps}, {"cells", cells}, {"failures", failures}};
}

std::string att_tables_csv(const std::vector<StackAttTable> &tables,
                           const EventStudyResult *result) {
  std::string out = "g,e,estimate,weight,n_g1,n_g0,ngc1,ngc0\n";
  for (const auto &table : tables) {
    for (const auto &kv : table.by_event) {
      if (!kv.second.feasible) continue;
      double weight = 0.0;
      if (result != nullptr) {
        auto it = result->by_event.find(kv.first);
        if (it != result->by_event.end()) {
          auto w = it->second.weights_used.find(table.g);
          if (w != it->second.weights_used.end()) weight = w->second;
        }
      }
      out += std::to_string(table.g) + "," + std::to_string(kv.first) + "," +
             fmt(kv.second.estimate) + "," + fmt(weight) + "," +
             std::to_string(kv.second.cell_counts[0]) + "," +
             std::to_string(kv.second.cell_counts[1]) + "," +
             std::to_string(kv.second.cell_counts[2]) + "," +
             std::to_string(kv.second.cell_counts[3]) + "\n";
    }
  }
  return out;
}

std::string stacked_csv(const StackedDataset &stacked,
                        const PanelDataset &ds) {
  std::string out = "stack,unit,time,role,event_time,dy\n";
  for (const auto &row : stacked.rows) {
    out += std::to_string(row.stack_g) + "," + ds.unit(row.unit_idx).unit_id +
           "," + std::to_string(row.time) + "," + cell_role_name(row.role) +
           "," + std::to_string(row.event_time) + "," + fmt(row.dy) + "\n";
  }
  return out;
}

std::string aux_weights_csv(const AuxWeightTable &table) {
  std::string out = "g,ell,j,omega\n";
  for (const auto &kv : table.rows) {
    for (std::size_t k = 0; k < table.included_events.size(); ++k) {
      out += kv.first.first.to_string() + "," +
             std::to_string(kv.first.second) + "," +
             std::to_string(table.included_events[k]) + "," +
             fmt(kv.second[k]) + "\n";
    }
  }
  return out;
}

std::string agg_weights_csv(const AggWeightTable &table) {
  std::string out = "g,ell,omega\n";
  for (const auto &kv : table.omega) {
    out += std::to_string(kv.first.first) + "," +
           std::to_string(kv.first.second) + "," + fmt(kv.second) + "\n";
  }
  return out;
}

std::string mc_summary_csv(const McSummary &summary) {
  std::string out =
      "estimator,e,mean_bias,rmse,coverage_95,mean_se,mean_estimate,target,"
      "reps_used\n";
  for (const auto &kv : summary.cells) {
    out += kv.first.first + "," + std::to_string(kv.first.second) + "," +
           fmt(kv.second.mean_bias) + "," + fmt(kv.second.rmse) + "," +
           fmt(kv.second.coverage_95) + "," + fmt(kv.second.mean_se) + "," +
           fmt(kv.second.mean_estimate) + "," + fmt(kv.second.target) + "," +
           std::to_string(kv.second.reps_used) + "\n";
  }
  return out;
}

namespace {

// Rank of a cohort within the configured list; the never-treated group ranks
// after every finite cohort.
int cohort_rank(const std::vector<int> &order, const CohortLabel &c) {
  if (c.is_never()) return static_cast<int>(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] == c.time()) return static_cast<int>(i);
  }
  return 0;
}

}  // namespace

DgpConfig dgp_from_json(const Json &spec) {
  DgpConfig cfg;
  cfg.n_units = spec.value("n_units", 100);
  cfg.T = spec.value("T", 6);
  cfg.noise_sd = spec.value("noise_sd", 1.0);
  cfg.seed = spec.value("seed", 1ULL);
  cfg.never_share = spec.value("never_share", 0.0);
  if (!spec.contains("cohorts")) throw ConfigError("dgp: missing cohorts");
  for (const auto &c : spec.at("cohorts")) {
    cfg.cohorts.emplace_back(c.at("g").get<int>(), c.at("share").get<double>());
  }
  if (spec.contains("eligible_share")) {
    for (const auto &kv : spec.at("eligible_share").items()) {
      const int key = kv.key() == "default" ? 0 : std::stoi(kv.key());
      cfg.eligible_share[key] = kv.value().get<double>();
    }
  } else {
    cfg.eligible_share[0] = 0.5;
  }

  auto family = [](const Json &f) { return f.value("family", "zero"); };
  std::vector<int> order;
  for (const auto &kv : cfg.cohorts) order.push_back(kv.first);

  if (spec.contains("group_time_trend")) {
    const Json f = spec.at("group_time_trend");
    const std::string kind = family(f);
    const double slope = f.value("slope", 0.0);
    const double inc = f.value("per_cohort_increment", 0.0);
    const double quad = f.value("quad", 0.0);
    const double jump = f.value("jump", 0.0);
    const int at = f.value("at", 1);
    if (kind == "zero") {
      cfg.group_time_trend = nullptr;
    } else if (kind == "linear" || kind == "quadratic") {
      cfg.group_time_trend = [=](const CohortLabel &c, int t) {
        return (slope + inc * cohort_rank(order, c)) * t + quad * t * t;
      };
    } else if (kind == "step") {
      cfg.group_time_trend = [=](const CohortLabel &c, int t) {
        return t >= at ? jump + inc * cohort_rank(order, c) : 0.0;
      };
    } else {
      throw ConfigError("dgp: unknown trend family '" + kind + "'");
    }
  }

  if (spec.contains("eligibility_time_trend")) {
    const Json f = spec.at("eligibility_time_trend");
    const std::string kind = family(f);
    const double slope = f.value("slope", 0.0);
    const double extra = f.value("eligible_extra", 0.0);
    const double quad = f.value("quad", 0.0);
    const double jump = f.value("jump", 0.0);
    const int at = f.value("at", 1);
    if (kind == "zero") {
      cfg.eligibility_time_trend = nullptr;
    } else if (kind == "linear" || kind == "quadratic") {
      cfg.eligibility_time_trend = [=](bool q, int t) {
        return (slope + (q ? extra : 0.0)) * t + quad * t * t;
      };
    } else if (kind == "step") {
      cfg.eligibility_time_trend = [=](bool q, int t) {
        return t >= at ? jump + (q ? extra : 0.0) : 0.0;
      };
    } else {
      throw ConfigError("dgp: unknown trend family '" + kind + "'");
    }
  }

  if (spec.contains("violation")) {
    const Json f = spec.at("violation");
    const double gamma = f.value("gamma", 0.0);
    const int cohort = f.at("cohort").get<int>();
    cfg.violation = [=](const CohortLabel &c, bool q, int t) {
      return (q && c.is_finite() && c.time() == cohort) ? gamma * t : 0.0;
    };
  }

  {
    const Json f = spec.value("catt", Json{{"family", "zero"}});
    const std::string kind = family(f);
    const double base = f.value("base", 0.0);
    const double per_event = f.value("per_event", 0.0);
    const double inc = f.value("per_cohort_increment", 0.0);
    const int at = f.value("at", 0);
    if (kind == "zero") {
      cfg.catt = [](int, int) { return 0.0; };
    } else if (kind == "linear" || kind == "constant") {
      cfg.catt = [=](int g, int e) {
        return base + per_event * e +
               inc * cohort_rank(order, CohortLabel::finite(g));
      };
    } else if (kind == "step") {
      cfg.catt = [=](int, int e) { return e >= at ? base : 0.0; };
    } else {
      throw ConfigError("dgp: unknown catt family '" + kind + "'");
    }
  }
  return cfg;
}

std::vector<EstimatorSpec> estimator_specs_from_json(const Json &spec) {
  std::vector<EstimatorSpec> out;
  for (const auto &e : spec) {
    EstimatorSpec s;
    const std::string kind = e.value("kind", "stacked");
    if (kind == "stacked") {
      s.kind = EstimatorSpec::Kind::Stacked;
    } else if (kind == "pooled_hw") {
      s.kind = EstimatorSpec::Kind::PooledHw;
    } else if (kind == "pooled_3wfe") {
      s.kind = EstimatorSpec::Kind::Pooled3wfe;
    } else {
      throw ConfigError("estimator: unknown kind '" + kind + "'");
    }
    const std::string weights = e.value("weights", "cohort");
    if (weights == "cohort") {
      s.scheme = WeightScheme::cohort_size();
    } else if (weights == "equal") {
      s.scheme = WeightScheme::equal();
    } else if (weights == "fwl") {
      s.scheme = WeightScheme::fwl();
    } else if (weights == "precision") {
      s.scheme = WeightScheme::precision();
    } else {
      throw ConfigError("estimator: unknown weights '" + weights + "'");
    }
    s.L = e.value("L", 1);
    s.K = e.value("K", 0);
    s.alpha = e.value("alpha", 0.05);
    s.label = e.value("label", kind + "/" + weights);
    out.push_back(std::move(s));
  }
  return out;
}

void write_text_file(const std::string &path, const std::string &content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
}

void write_json_file(const std::string &path, const Json &value) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << value.dump(2) << "\n";
}

}  // namespace sddd
