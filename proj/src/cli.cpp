#include "sddd/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "sddd/inference.hpp"
#include "sddd/serialize.hpp"

namespace sddd {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
  std::string command;
  std::string input;
  std::string schema_path;
  PanelSchema schema;
  int L = 1;
  int K = 0;
  std::string rule = "never";          // never | earliest | explicit:G
  std::string weights = "cohort";      // fwl|cohort|equal|precision|custom:FILE
  double alpha = 0.05;
  int bootstrap_B = 0;
  std::string multiplier = "rademacher";
  std::uint64_t seed = 12345;
  std::string out_dir = ".";
  std::vector<std::string> formats = {"json", "csv"};
  std::string on_infeasible = "skip";
  std::string spec_kind = "hw_style";  // decompose
  std::string dgp_path;                // simulate
  int reps = 0;
  Json dgp;
  Json estimators;
  std::map<int, double> custom_weights;

  Json to_json() const {
    Json schema_json = {{"unit", schema.unit_column},
                        {"time", schema.time_column},
                        {"outcome", schema.outcome_column},
                        {"cohort", schema.cohort_column},
                        {"eligible", schema.eligible_column},
                        {"never_token", schema.never_token},
                        {"delimiter", std::string(1, schema.delimiter)}};
    Json j = {{"command", command},
              {"input", input},
              {"schema", schema_json},
              {"L", L},
              {"K", K},
              {"rule", rule},
              {"weights", weights},
              {"alpha", alpha},
              {"bootstrap", {{"B", bootstrap_B},
                             {"multiplier", multiplier},
                             {"seed", seed}}},
              {"out", out_dir},
              {"formats", formats},
              {"on_infeasible", on_infeasible},
              {"spec", spec_kind}};
    if (!dgp.is_null()) j["dgp"] = dgp;
    if (!estimators.is_null()) j["estimators"] = estimators;
    if (reps > 0) j["reps"] = reps;
    if (!custom_weights.empty()) {
      Json w;
      for (const auto &kv : custom_weights) {
        w[std::to_string(kv.first)] = kv.second;
      }
      j["custom_weights"] = w;
    }
    return j;
  }
};

Json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  Json j;
  try {
    in >> j;
  } catch (const std::exception &e) {
    throw ParseError("bad JSON in '" + path + "': " + e.what());
  }
  return j;
}

void apply_config_json(RunConfig &cfg, const Json &j) {
  cfg.input = j.value("input", cfg.input);
  cfg.L = j.value("L", cfg.L);
  cfg.K = j.value("K", cfg.K);
  cfg.rule = j.value("rule", cfg.rule);
  cfg.weights = j.value("weights", cfg.weights);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.out_dir = j.value("out", cfg.out_dir);
  cfg.on_infeasible = j.value("on_infeasible", cfg.on_infeasible);
  cfg.spec_kind = j.value("spec", cfg.spec_kind);
  cfg.reps = j.value("reps", cfg.reps);
  if (j.contains("formats")) {
    cfg.formats = j.at("formats").get<std::vector<std::string>>();
  }
  if (j.contains("bootstrap")) {
    const Json &b = j.at("bootstrap");
    cfg.bootstrap_B = b.value("B", cfg.bootstrap_B);
    cfg.multiplier = b.value("multiplier", cfg.multiplier);
    cfg.seed = b.value("seed", cfg.seed);
  }
  if (j.contains("schema")) {
    const Json &s = j.at("schema");
    cfg.schema.unit_column = s.value("unit", cfg.schema.unit_column);
    cfg.schema.time_column = s.value("time", cfg.schema.time_column);
    cfg.schema.outcome_column = s.value("outcome", cfg.schema.outcome_column);
    cfg.schema.cohort_column = s.value("cohort", cfg.schema.cohort_column);
    cfg.schema.eligible_column =
        s.value("eligible", cfg.schema.eligible_column);
    cfg.schema.never_token = s.value("never_token", cfg.schema.never_token);
    const std::string delim =
        s.value("delimiter", std::string(1, cfg.schema.delimiter));
    if (delim.size() == 1) cfg.schema.delimiter = delim[0];
  }
  if (j.contains("custom_weights")) {
    for (const auto &kv : j.at("custom_weights").items()) {
      cfg.custom_weights[std::stoi(kv.key())] = kv.value().get<double>();
    }
  }
  if (j.contains("dgp")) cfg.dgp = j.at("dgp");
  if (j.contains("estimators")) cfg.estimators = j.at("estimators");
}

ComparisonRule parse_rule(const std::string &rule) {
  if (rule == "never") return ComparisonRule::prefer_never();
  if (rule == "earliest") return ComparisonRule::earliest_admissible();
  if (rule.rfind("explicit:", 0) == 0) {
    const std::string arg = rule.substr(9);
    if (arg == "never") {
      return ComparisonRule::explicit_comparison(CohortLabel::never());
    }
    return ComparisonRule::explicit_comparison(
        CohortLabel::finite(std::stoi(arg)));
  }
  throw ConfigError("unknown rule '" + rule + "'");
}

WeightScheme parse_weights(RunConfig &cfg) {
  const std::string &w = cfg.weights;
  if (w == "fwl") return WeightScheme::fwl();
  if (w == "cohort") return WeightScheme::cohort_size();
  if (w == "equal") return WeightScheme::equal();
  if (w == "precision") return WeightScheme::precision();
  if (w.rfind("custom:", 0) == 0) {
    const Json j = read_json_file(w.substr(7));
    std::map<int, double> v;
    for (const auto &kv : j.items()) {
      v[std::stoi(kv.key())] = kv.value().get<double>();
    }
    cfg.custom_weights = v;
    return WeightScheme::custom_weights(v);
  }
  if (w == "custom" && !cfg.custom_weights.empty()) {
    return WeightScheme::custom_weights(cfg.custom_weights);
  }
  throw ConfigError("unknown weights '" + w + "'");
}

bool wants(const RunConfig &cfg, const std::string &format) {
  return std::find(cfg.formats.begin(), cfg.formats.end(), format) !=
         cfg.formats.end();
}

void emit_resolved_config(const RunConfig &cfg) {
  fs::create_directories(cfg.out_dir);
  write_json_file((fs::path(cfg.out_dir) / "resolved_config.json").string(),
                  cfg.to_json());
}

int cmd_validate(RunConfig cfg) {
  cfg.command = "validate";
  emit_resolved_config(cfg);
  const PanelDataset ds = load_panel_file(cfg.input, cfg.schema);
  const ValidationReport report = validate_panel(ds);
  write_json_file((fs::path(cfg.out_dir) / "validation.json").string(),
                  to_json(report));
  return (report.overlap_ok && report.violations.empty()) ? 0 : 1;
}

int cmd_estimate(RunConfig cfg) {
  cfg.command = "estimate";
  const WeightScheme scheme = parse_weights(cfg);
  emit_resolved_config(cfg);
  const fs::path out(cfg.out_dir);

  const PanelDataset ds = load_panel_file(cfg.input, cfg.schema);
  const auto on_inf = cfg.on_infeasible == "error" ? OnInfeasible::Error
                                                   : OnInfeasible::Skip;
  const StackCollection built =
      build_all_stacks(ds, parse_rule(cfg.rule), cfg.L, cfg.K, on_inf);
  if (built.stacks.empty()) {
    throw InfeasibleError("no feasible stack for any treated cohort");
  }

  Json stacks_json = {{"rosters", stack_roster_json(built.stacks, ds)}};
  Json skipped = Json::array();
  for (const auto &kv : built.skipped) {
    skipped.push_back({{"g", kv.first}, {"reason", kv.second}});
  }
  stacks_json["skipped"] = skipped;
  write_json_file((out / "stacks.json").string(), stacks_json);

  std::vector<StackAttTable> tables;
  for (const Stack &s : built.stacks) {
    tables.push_back(stack_event_study(ds, s));
  }

  const auto variances = estimate_variances_by_event(ds, built.stacks);
  const EventStudyResult result =
      event_study(ds, built.stacks, scheme, &variances);

  if (wants(cfg, "json")) {
    Json att = Json::array();
    for (const auto &t : tables) att.push_back(to_json(t));
    write_json_file((out / "stack_att.json").string(), att);
    write_json_file((out / "event_study.json").string(), to_json(result));
  }
  if (wants(cfg, "csv")) {
    write_text_file((out / "stack_att.csv").string(),
                    att_tables_csv(tables, &result));
    write_text_file((out / "stacked.csv").string(),
                    stacked_csv(materialize_stacked(built.stacks, ds), ds));
  }

  // Pointwise inference at every estimated event time, then the optional
  // simultaneous band.
  Json inference = Json::array();
  std::map<int, AggregatedInfluence> influence_by_e;
  std::map<int, double> estimates;
  for (const auto &kv : result.by_event) {
    const int e = kv.first;
    const AggregatedInfluence infl =
        aggregated_influence(ds, built.stacks, kv.second.weights_used, e);
    const double v = plugin_variance(infl);
    const auto ci = pointwise_ci(kv.second.estimate, v, infl.n, cfg.alpha);
    double v_crve = 0.0;
    try {
      v_crve = crve_variance(ds, built.stacks, e);
    } catch (const Error &) {
      v_crve = -1.0;  // not available at this e
    }
    inference.push_back(
        {{"e", e},
         {"estimate", kv.second.estimate},
         {"v_plugin", v},
         {"v_crve", v_crve},
         {"n", infl.n},
         {"se", std::sqrt(v / infl.n)},
         {"ci", {ci.first, ci.second}}});
    influence_by_e.emplace(e, std::move(infl));
    estimates[e] = kv.second.estimate;
  }
  Json inference_json = {{"alpha", cfg.alpha}, {"points", inference}};

  if (cfg.bootstrap_B > 0) {
    const auto mult = cfg.multiplier == "gaussian" ? Multiplier::Gaussian
                                                   : Multiplier::Rademacher;
    const BandResult band =
        multiplier_bootstrap(influence_by_e, estimates, cfg.bootstrap_B, mult,
                             cfg.seed, cfg.alpha);
    inference_json["band"] = to_json(band);
  }
  write_json_file((out / "inference.json").string(), inference_json);
  return 0;
}

int cmd_decompose(RunConfig cfg) {
  cfg.command = "decompose";
  emit_resolved_config(cfg);
  const fs::path out(cfg.out_dir);
  const PanelDataset ds = load_panel_file(cfg.input, cfg.schema);
  const SpecKind kind =
      cfg.spec_kind == "plain_3wfe" ? SpecKind::Plain3wfe : SpecKind::HwStyle;

  const AuxWeightTable table = aux_weights(ds, kind, cfg.L, cfg.K);
  const WeightPropertyReport checks = check_weight_properties(table);

  // Equal aggregation weights over the included post periods.
  std::map<int, double> w;
  int n_post = 0;
  for (int j : table.included_events) {
    if (j >= 0) n_post += 1;
  }
  for (int j : table.included_events) {
    if (j >= 0) w[j] = 1.0 / n_post;
  }
  const AggWeightTable agg = aggregated_weights(table, w);

  const auto alpha_hat = pooled_3wfe_event_study(ds, kind, cfg.L, cfg.K);
  Json alpha_json;
  for (const auto &kv : alpha_hat) {
    alpha_json[std::to_string(kv.first)] = kv.second;
  }

  if (wants(cfg, "json")) {
    write_json_file((out / "aux_weights.json").string(), to_json(table));
    write_json_file((out / "agg_weights.json").string(), to_json(agg));
    write_json_file((out / "weight_checks.json").string(), to_json(checks));
    write_json_file((out / "pooled_event_study.json").string(), alpha_json);
  }
  if (wants(cfg, "csv")) {
    write_text_file((out / "aux_weights.csv").string(),
                    aux_weights_csv(table));
    write_text_file((out / "agg_weights.csv").string(), agg_weights_csv(agg));
  }
  return 0;
}

int cmd_simulate(RunConfig cfg) {
  cfg.command = "simulate";
  if (cfg.dgp.is_null() && !cfg.dgp_path.empty()) {
    cfg.dgp = read_json_file(cfg.dgp_path);
  }
  if (cfg.dgp.is_null()) throw ConfigError("simulate: no DGP configuration");
  emit_resolved_config(cfg);
  const fs::path out(cfg.out_dir);

  const DgpConfig dgp = dgp_from_json(cfg.dgp);
  const PanelDataset ds = simulate_panel(dgp);
  write_panel_file((out / "panel.csv").string(), ds, cfg.schema);

  if (cfg.reps > 0) {
    std::vector<EstimatorSpec> specs;
    if (!cfg.estimators.is_null()) {
      specs = estimator_specs_from_json(cfg.estimators);
    } else {
      EstimatorSpec s;
      s.L = cfg.L;
      s.K = cfg.K;
      s.alpha = cfg.alpha;
      s.label = "stacked/cohort";
      specs.push_back(s);
    }
    const McSummary summary = monte_carlo(dgp, specs, cfg.reps);
    if (wants(cfg, "json")) {
      write_json_file((out / "mc_summary.json").string(), to_json(summary));
    }
    if (wants(cfg, "csv")) {
      write_text_file((out / "mc_summary.csv").string(),
                      mc_summary_csv(summary));
    }
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string> &args) {
  CLI::App app{"stacked triple-differences estimation"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;

  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--config", config_path,
                    "JSON run configuration; flags override its fields");
    sub->add_option("--input", cfg.input, "panel CSV path");
    sub->add_option("--schema", cfg.schema_path, "schema JSON path");
    sub->add_option("--L", cfg.L, "pre-window length (>= 1)");
    sub->add_option("--K", cfg.K, "post-window length (>= 0)");
    sub->add_option("--rule", cfg.rule, "never | earliest | explicit:G");
    sub->add_option("--weights", cfg.weights,
                    "fwl | cohort | equal | precision | custom:FILE");
    sub->add_option("--alpha", cfg.alpha, "confidence level alpha");
    sub->add_option("--bootstrap-B", cfg.bootstrap_B,
                    "bootstrap replications (0 disables the band)");
    sub->add_option("--multiplier", cfg.multiplier, "rademacher | gaussian");
    sub->add_option("--seed", cfg.seed, "master seed");
    sub->add_option("--out", cfg.out_dir, "output directory");
    sub->add_option("--format", cfg.formats, "json and/or csv");
    sub->add_option("--on-infeasible", cfg.on_infeasible, "skip | error");
  };

  CLI::App *validate = app.add_subcommand("validate", "check a panel");
  CLI::App *estimate =
      app.add_subcommand("estimate", "stacked event-study estimation");
  CLI::App *decompose = app.add_subcommand(
      "decompose", "implicit weights of the pooled event-study regression");
  CLI::App *simulate =
      app.add_subcommand("simulate", "generate synthetic panels / Monte Carlo");
  add_common(validate);
  add_common(estimate);
  add_common(decompose);
  add_common(simulate);
  decompose->add_option("--spec", cfg.spec_kind, "hw_style | plain_3wfe");
  simulate->add_option("--dgp", cfg.dgp_path, "DGP JSON path");
  simulate->add_option("--reps", cfg.reps, "Monte Carlo replications");

  std::vector<const char *> argv;
  argv.push_back("sddd");
  for (const auto &a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    // Layering: config file first, then flags passed on the command line win.
    if (!config_path.empty()) {
      RunConfig base = cfg;  // flag values
      cfg = RunConfig{};
      apply_config_json(cfg, read_json_file(config_path));
      cfg.schema_path = base.schema_path;
      cfg.dgp_path = base.dgp_path;
      CLI::App *active = app.get_subcommands().front();
      auto overridden = [&](const std::string &flag) {
        const CLI::Option *opt = active->get_option_no_throw(flag);
        return opt != nullptr && opt->count() > 0;
      };
      if (overridden("--input")) cfg.input = base.input;
      if (overridden("--L")) cfg.L = base.L;
      if (overridden("--K")) cfg.K = base.K;
      if (overridden("--rule")) cfg.rule = base.rule;
      if (overridden("--weights")) cfg.weights = base.weights;
      if (overridden("--alpha")) cfg.alpha = base.alpha;
      if (overridden("--bootstrap-B")) cfg.bootstrap_B = base.bootstrap_B;
      if (overridden("--multiplier")) cfg.multiplier = base.multiplier;
      if (overridden("--seed")) cfg.seed = base.seed;
      if (overridden("--out")) cfg.out_dir = base.out_dir;
      if (overridden("--format")) cfg.formats = base.formats;
      if (overridden("--on-infeasible")) cfg.on_infeasible = base.on_infeasible;
      if (overridden("--spec")) cfg.spec_kind = base.spec_kind;
      if (overridden("--reps")) cfg.reps = base.reps;
    }
    if (!cfg.schema_path.empty()) {
      apply_config_json(cfg, Json{{"schema", read_json_file(cfg.schema_path)}});
    }

    if (app.got_subcommand("validate")) return cmd_validate(cfg);
    if (app.got_subcommand("estimate")) return cmd_estimate(cfg);
    if (app.got_subcommand("decompose")) return cmd_decompose(cfg);
    if (app.got_subcommand("simulate")) return cmd_simulate(cfg);
    return 1;
  } catch (const IoError &e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace sddd
