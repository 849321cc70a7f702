#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "pilot/parallel.hpp"
#include "pilot/oful_sim.hpp"
#include "pilot/replay.hpp"
#include "pilot/report_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pilot;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_override;
  std::optional<std::uint64_t> seed_override;
};

void require_exists(const std::string& path, const char* what) {
  if (!fs::exists(path))
    throw ConfigError(std::string(what) + " path does not exist: " + path);
}

json load_config(const GlobalOptions& opts) {
  if (opts.config_path.empty()) throw ConfigError("--config is required");
  require_exists(opts.config_path, "config");
  return read_json_file(opts.config_path);
}

std::string out_dir(const GlobalOptions& opts, const json& cfg) {
  if (!opts.out_override.empty()) return opts.out_override;
  if (cfg.contains("out")) return cfg.at("out").get<std::string>();
  return "out";
}

std::vector<std::uint64_t> run_seeds(const GlobalOptions& opts, const json& cfg) {
  if (opts.seed_override) return {*opts.seed_override};
  if (cfg.contains("seeds")) {
    auto seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
    if (seeds.empty()) throw ConfigError("'seeds' must be non-empty");
    return seeds;
  }
  return {0};
}

Dataset dataset_from_cfg(const json& dcfg) {
  if (!dcfg.contains("path")) throw ConfigError("dataset config missing 'path'");
  std::string path = dcfg.at("path").get<std::string>();
  require_exists(path, "dataset");
  DatasetFormat format = dataset_format_from_string(
      dcfg.contains("format") ? dcfg.at("format").get<std::string>() : "jsonl");
  std::string manifest = dcfg.contains("manifest") ? dcfg.at("manifest").get<std::string>() : "";
  if (!manifest.empty()) require_exists(manifest, "manifest");
  return load_routing_dataset(path, format, manifest);
}

Dataset main_dataset(const json& cfg) {
  if (!cfg.contains("dataset")) throw ConfigError("config missing 'dataset'");
  return dataset_from_cfg(cfg.at("dataset"));
}

ModelArtifact model_from_cfg(const json& cfg) {
  if (!cfg.contains("model")) throw ConfigError("config missing 'model'");
  std::string path = cfg.at("model").get<std::string>();
  require_exists(path, "model");
  return load_model_artifact(path);
}

PolicySpec policy_from_cfg(const json& cfg) {
  if (!cfg.contains("policy")) throw ConfigError("config missing 'policy'");
  return policy_spec_from_json(cfg.at("policy"));
}

SplitBuckets split_from_cfg(const json& cfg, const Dataset& d) {
  std::size_t tuning_n = 1000;
  int learn_ratio = 10;
  int deploy_ratio = 1;
  std::uint64_t seed = 0;
  if (cfg.contains("split")) {
    const json& s = cfg.at("split");
    if (s.contains("tuning_n")) tuning_n = s.at("tuning_n").get<std::size_t>();
    if (s.contains("learn_ratio")) learn_ratio = s.at("learn_ratio").get<int>();
    if (s.contains("deploy_ratio")) deploy_ratio = s.at("deploy_ratio").get<int>();
    if (s.contains("seed")) seed = s.at("seed").get<std::uint64_t>();
  }
  return split_buckets(d, tuning_n, learn_ratio, deploy_ratio, seed);
}

PretrainHyperparams pretrain_hp_from_cfg(const json& cfg, std::uint64_t seed) {
  PretrainHyperparams hp;
  hp.seed = seed;
  if (cfg.contains("pretrain")) {
    const json& p = cfg.at("pretrain");
    if (p.contains("learning_rate")) hp.learning_rate = p.at("learning_rate").get<double>();
    if (p.contains("epochs")) hp.epochs = p.at("epochs").get<int>();
    if (p.contains("margin")) hp.margin = p.at("margin").get<double>();
  }
  return hp;
}

ReplayOptions replay_opts_from_cfg(const json& cfg) {
  ReplayOptions opts;
  if (cfg.contains("binarize_threshold"))
    opts.binarize_threshold = cfg.at("binarize_threshold").get<double>();
  return opts;
}

// Budget bounds: explicit ub/lb, or "auto" (the default) estimated from the
// tuning bucket's true score/cost ratios.
CostPolicyConfig cost_from_cfg(const json& cfg, const Dataset& tuning, long horizon) {
  CostPolicyConfig cc;
  cc.horizon = horizon;
  if (!cfg.contains("cost")) throw ConfigError("config missing 'cost'");
  const json& c = cfg.at("cost");
  if (c.contains("budget")) cc.budget = c.at("budget").get<double>();
  if (c.contains("bin_size")) cc.bin_size = c.at("bin_size").get<long>();
  const bool explicit_bounds = c.contains("ub") && c.contains("lb");
  if (explicit_bounds) {
    cc.ub = c.at("ub").get<double>();
    cc.lb = c.at("lb").get<double>();
  } else {
    RatioBounds b = estimate_bounds(
        tuning, [](const RoutingRecord& r, int a) { return r.scores[a]; });
    cc.ub = b.ub;
    cc.lb = b.lb;
  }
  return cc;
}

std::vector<double> alpha_grid_from_cfg(const json& cfg) {
  if (cfg.contains("grids") && cfg.at("grids").contains("alpha"))
    return cfg.at("grids").at("alpha").get<std::vector<double>>();
  return {1.0, 1.5, 2.0, 5.0, 10.0};
}

std::vector<int> window_grid_from_cfg(const json& cfg) {
  if (cfg.contains("grids") && cfg.at("grids").contains("window"))
    return cfg.at("grids").at("window").get<std::vector<int>>();
  return {10, 50, 100, 500};
}

const ArmEmbeddings* emb_for(const PolicySpec& spec, const ModelArtifact& model) {
  return spec.kind == PolicyKind::pilot ? &model.emb : nullptr;
}

int cmd_pretrain(const GlobalOptions& opts) {
  json cfg = load_config(opts);
  if (!cfg.contains("preferences")) throw ConfigError("config missing 'preferences'");
  if (!cfg.contains("manifest")) throw ConfigError("config missing 'manifest'");
  if (!cfg.contains("d_m")) throw ConfigError("config missing 'd_m'");
  std::string pref_path = cfg.at("preferences").get<std::string>();
  std::string manifest_path = cfg.at("manifest").get<std::string>();
  require_exists(pref_path, "preferences");
  require_exists(manifest_path, "manifest");

  std::vector<std::uint64_t> seeds = run_seeds(opts, cfg);
  PretrainHyperparams hp = pretrain_hp_from_cfg(cfg, seeds[0]);
  DatasetManifest manifest = load_arm_manifest(manifest_path);
  std::vector<PreferenceRecord> prefs = load_preferences(pref_path, manifest);

  ModelArtifact model;
  model.proj = train_projection(prefs, cfg.at("d_m").get<int>(), hp);
  model.emb = train_arm_embeddings(prefs, manifest.arms, model.proj, hp);
  model.arms = manifest.arms;

  std::string out = out_dir(opts, cfg);
  fs::create_directories(out);
  save_model_artifact(model, out + "/model.json");

  json summary{{"model", out + "/model.json"},
               {"arms", manifest.arms.size()},
               {"preferences", prefs.size()},
               {"accuracy", model.emb.accuracy},
               {"final_triplet_loss", mean_triplet_loss(model.proj, prefs, hp.margin, seeds[0])}};
  write_json_file(summary, out + "/pretrain_summary.json");
  write_run_manifest(out, "pretrain", cfg, seeds);
  std::cout << "wrote " << out << "/model.json\n";
  return 0;
}

int cmd_tune(const GlobalOptions& opts) {
  json cfg = load_config(opts);
  Dataset data = main_dataset(cfg);
  ModelArtifact model = model_from_cfg(cfg);
  PolicySpec spec = policy_from_cfg(cfg);
  SplitBuckets buckets = split_from_cfg(cfg, data);
  std::vector<std::uint64_t> seeds = run_seeds(opts, cfg);

  TuneResult result = tune_hyperparams(spec, alpha_grid_from_cfg(cfg), window_grid_from_cfg(cfg),
                                       model.proj, buckets.tuning, emb_for(spec, model),
                                       seeds[0], thread_cap_from_env(),
                                       replay_opts_from_cfg(cfg));

  std::string out = out_dir(opts, cfg);
  fs::create_directories(out);
  json alpha_table = json::array();
  for (auto& [a, r] : result.alpha_rewards) alpha_table.push_back(json{{"alpha", a}, {"reward", r}});
  json window_table = json::array();
  for (auto& [w, r] : result.window_rewards) window_table.push_back(json{{"window", w}, {"reward", r}});
  json j{{"policy", policy_spec_to_json(result.best)},
         {"best_reward", result.best_reward},
         {"alpha_table", std::move(alpha_table)},
         {"window_table", std::move(window_table)}};
  write_json_file(j, out + "/best_hyperparams.json");
  write_run_manifest(out, "tune", cfg, seeds);
  std::cout << "wrote " << out << "/best_hyperparams.json\n";
  return 0;
}

int cmd_replay_learn(const GlobalOptions& opts) {
  json cfg = load_config(opts);
  Dataset data = main_dataset(cfg);
  ModelArtifact model = model_from_cfg(cfg);
  PolicySpec spec = policy_from_cfg(cfg);
  SplitBuckets buckets = split_from_cfg(cfg, data);
  std::vector<std::uint64_t> seeds = run_seeds(opts, cfg);
  ReplayOptions ropts = replay_opts_from_cfg(cfg);
  std::string out = out_dir(opts, cfg);
  fs::create_directories(out);

  std::vector<ReplayReport> reports(seeds.size());
  std::vector<std::string> checkpoints(seeds.size());
  parallel_for(seeds.size(), thread_cap_from_env(), [&](std::size_t i) {
    PolicySpec run = spec;
    run.seed = seeds[i];
    auto policy = make_policy(run, model.proj.d_m, buckets.learning.num_arms(),
                              emb_for(spec, model));
    reports[i] = run_learning(*policy, model.proj, buckets.learning, seeds[i], ropts);
    if (PilotRouter* router = policy->router()) {
      checkpoints[i] = out + "/checkpoint_" + std::to_string(seeds[i]) + ".json";
      router->save_checkpoint(checkpoints[i]);
    }
  });
  emit_report(reports, "learning", out);
  write_run_manifest(out, "replay-learn", cfg, seeds);
  std::cout << "wrote learning reports for " << seeds.size() << " seed(s) to " << out << "\n";
  return 0;
}

int cmd_replay_deploy(const GlobalOptions& opts) {
  json cfg = load_config(opts);
  Dataset data = main_dataset(cfg);
  ModelArtifact model = model_from_cfg(cfg);
  PolicySpec spec = policy_from_cfg(cfg);
  SplitBuckets buckets = split_from_cfg(cfg, data);
  std::vector<std::uint64_t> seeds = run_seeds(opts, cfg);
  ReplayOptions ropts = replay_opts_from_cfg(cfg);
  CostPolicyConfig cc = cost_from_cfg(cfg, buckets.tuning,
                                      static_cast<long>(buckets.deployment.records.size()));
  cc.validate();

  std::vector<ReplayReport> reports(seeds.size());
  parallel_for(seeds.size(), thread_cap_from_env(), [&](std::size_t i) {
    PolicySpec run = spec;
    run.seed = seeds[i];
    auto policy = make_policy(run, model.proj.d_m, buckets.learning.num_arms(),
                              emb_for(spec, model));
    run_learning(*policy, model.proj, buckets.learning, seeds[i], ropts);
    reports[i] = run_deployment(*policy, model.proj, buckets.deployment, cc, ropts);
    reports[i].seed = seeds[i];
  });

  std::string out = out_dir(opts, cfg);
  emit_report(reports, "deployment", out);
  write_run_manifest(out, "replay-deploy", cfg, seeds);
  std::cout << "wrote deployment reports for " << seeds.size() << " seed(s) to " << out << "\n";
  return 0;
}

int cmd_sweep_budget(const GlobalOptions& opts) {
  json cfg = load_config(opts);
  Dataset data = main_dataset(cfg);
  ModelArtifact model = model_from_cfg(cfg);
  PolicySpec spec = policy_from_cfg(cfg);
  SplitBuckets buckets = split_from_cfg(cfg, data);
  std::vector<std::uint64_t> seeds = run_seeds(opts, cfg);
  ReplayOptions ropts = replay_opts_from_cfg(cfg);
  if (!cfg.contains("budgets")) throw ConfigError("config missing 'budgets'");
  auto budgets = cfg.at("budgets").get<std::vector<double>>();

  CostPolicyConfig base = cost_from_cfg(cfg, buckets.tuning,
                                        static_cast<long>(buckets.deployment.records.size()));
  if (base.budget <= 0.0) base.budget = 1.0;  // replaced per grid point

  std::vector<BudgetPoint> table =
      sweep_budget(spec, model.proj, emb_for(spec, model), buckets.learning,
                   buckets.deployment, budgets, base, seeds, thread_cap_from_env(), ropts);

  std::string out = out_dir(opts, cfg);
  fs::create_directories(out);
  CsvTable t;
  t.comment = "performance vs budget; mean and standard error over " +
              std::to_string(seeds.size()) + " seed(s)";
  t.columns = {"budget", "performance_mean", "performance_stderr", "budget_used_mean",
               "terminated_runs"};
  json jt = json::array();
  for (const BudgetPoint& p : table) {
    t.rows.push_back({csv_cell(p.budget), csv_cell(p.mean_performance),
                      csv_cell(p.stderr_performance), csv_cell(p.mean_budget_used),
                      csv_cell(p.terminated_runs)});
    jt.push_back(json{{"budget", p.budget},
                      {"performance_mean", p.mean_performance},
                      {"performance_stderr", p.stderr_performance},
                      {"budget_used_mean", p.mean_budget_used},
                      {"terminated_runs", p.terminated_runs}});
  }
  write_csv_file(t, out + "/budget_table.csv");
  write_json_file(jt, out + "/budget_table.json");
  write_run_manifest(out, "sweep-budget", cfg, seeds);
  std::cout << "wrote " << out << "/budget_table.csv\n";
  return 0;
}

int cmd_shift(const GlobalOptions& opts) {
  json cfg = load_config(opts);
  if (!cfg.contains("shift")) throw ConfigError("config missing 'shift'");
  const json& sh = cfg.at("shift");
  if (!sh.contains("stream_a") || !sh.contains("stream_b"))
    throw ConfigError("shift config needs 'stream_a' and 'stream_b'");
  Dataset stream_a = dataset_from_cfg(sh.at("stream_a"));
  Dataset stream_b = dataset_from_cfg(sh.at("stream_b"));
  long probe = sh.contains("probe_window") ? sh.at("probe_window").get<long>() : 500;
  ModelArtifact model = model_from_cfg(cfg);
  PolicySpec spec = policy_from_cfg(cfg);
  std::vector<std::uint64_t> seeds = run_seeds(opts, cfg);
  ReplayOptions ropts = replay_opts_from_cfg(cfg);

  std::vector<ShiftReport> reports(seeds.size());
  parallel_for(seeds.size(), thread_cap_from_env(), [&](std::size_t i) {
    PolicySpec run = spec;
    run.seed = seeds[i];
    auto policy = make_policy(run, model.proj.d_m, stream_a.num_arms(), emb_for(spec, model));
    reports[i] = distribution_shift_replay(*policy, model.proj, stream_a, stream_b, probe, ropts);
  });

  std::string out = out_dir(opts, cfg);
  fs::create_directories(out);

  auto collect = [&](auto getter) {
    std::vector<double> v;
    for (const ShiftReport& r : reports) v.push_back(getter(r));
    return v;
  };
  CsvTable t;
  t.comment = "shift probe windows; mean and standard error over " +
              std::to_string(seeds.size()) + " seed(s)";
  t.columns = {"window", "reward_mean", "reward_stderr", "ucb_width_mean", "ucb_width_stderr",
               "posterior_trace_mean", "posterior_trace_stderr"};
  struct Row {
    const char* name;
    WindowStats ShiftReport::* stats;
  };
  for (const Row& row : {Row{"before", &ShiftReport::before}, Row{"during", &ShiftReport::during},
                         Row{"after", &ShiftReport::after}}) {
    auto rewards = collect([&](const ShiftReport& r) { return (r.*row.stats).mean_reward; });
    auto widths = collect([&](const ShiftReport& r) { return (r.*row.stats).mean_ucb_width; });
    auto traces = collect([&](const ShiftReport& r) { return (r.*row.stats).mean_posterior_trace; });
    t.rows.push_back({row.name, csv_cell(mean_of(rewards)), csv_cell(stderr_of(rewards)),
                      csv_cell(mean_of(widths)), csv_cell(stderr_of(widths)),
                      csv_cell(mean_of(traces)), csv_cell(stderr_of(traces))});
  }
  write_csv_file(t, out + "/shift_summary.csv");

  std::vector<std::vector<double>> reward_series, width_series, trace_series;
  for (const ShiftReport& r : reports) {
    reward_series.push_back(r.reward_series);
    width_series.push_back(r.width_series);
    trace_series.push_back(r.trace_series);
  }
  SeriesAggregate ra = aggregate_series(reward_series);
  SeriesAggregate wa = aggregate_series(width_series);
  SeriesAggregate ca = aggregate_series(trace_series);
  CsvTable s;
  s.comment = "per-step shift series (boundary at t=" + std::to_string(reports[0].boundary) +
              "); seed means";
  s.columns = {"t", "reward_mean", "ucb_width_mean", "posterior_trace_mean"};
  for (std::size_t i = 0; i < ra.mean.size(); ++i)
    s.rows.push_back({csv_cell(static_cast<long>(i)), csv_cell(ra.mean[i]),
                      csv_cell(wa.mean[i]), csv_cell(ca.mean[i])});
  write_csv_file(s, out + "/shift_series.csv");
  write_run_manifest(out, "shift", cfg, seeds);
  std::cout << "wrote " << out << "/shift_summary.csv\n";
  return 0;
}

int cmd_report(const GlobalOptions& opts) {
  json cfg = load_config(opts);
  if (!cfg.contains("reports")) throw ConfigError("config missing 'reports'");
  if (!cfg.contains("kind")) throw ConfigError("config missing 'kind'");
  std::string path = cfg.at("reports").get<std::string>();
  require_exists(path, "reports");
  json arr = read_json_file(path);
  if (!arr.is_array()) throw ConfigError("reports file must hold a JSON array");
  std::vector<ReplayReport> reports;
  for (const json& j : arr) reports.push_back(report_from_json(j));
  std::string out = out_dir(opts, cfg);
  emit_report(reports, cfg.at("kind").get<std::string>(), out);
  write_run_manifest(out, "report", cfg, {});
  std::cout << "re-rendered " << reports.size() << " report(s) to " << out << "\n";
  return 0;
}

int cmd_validate_regret(const GlobalOptions& opts) {
  json cfg = load_config(opts);
  json r = cfg.contains("regret") ? cfg.at("regret") : json::object();
  LinearBanditInstance inst;
  int d = r.contains("d") ? r.at("d").get<int>() : 8;
  inst.num_actions = r.contains("actions") ? r.at("actions").get<int>() : 10;
  inst.noise_scale = r.contains("noise_scale") ? r.at("noise_scale").get<double>() : 0.1;
  inst.horizon = r.contains("horizon") ? r.at("horizon").get<long>() : 2000;
  inst.delta = r.contains("delta") ? r.at("delta").get<double>() : 0.05;
  inst.lambda_reg = r.contains("lambda") ? r.at("lambda").get<double>() : 1.0;
  double scale = r.contains("theta_scale") ? r.at("theta_scale").get<double>() : 1.0;
  double ratio = r.contains("prior_distance_ratio") ? r.at("prior_distance_ratio").get<double>() : 0.25;
  int num_seeds = r.contains("num_seeds") ? r.at("num_seeds").get<int>() : 50;

  std::vector<std::uint64_t> seeds = run_seeds(opts, cfg);
  Rng rng(seeds[0]);
  inst.theta_star = scale * unit_sphere_sample(d, rng);
  Eigen::VectorXd theta_pref =
      inst.theta_star + ratio * inst.theta_star.norm() * unit_sphere_sample(d, rng);

  RegretSummary summary =
      run_regret_suite(inst, theta_pref, num_seeds, seeds[0], thread_cap_from_env());

  std::string out = out_dir(opts, cfg);
  fs::create_directories(out);
  CsvTable t;
  t.comment = "cumulative regret, OFUL vs PI-OFUL; mean and standard error over " +
              std::to_string(num_seeds) + " seeds";
  t.columns = {"t", "regret_oful_mean", "regret_oful_stderr", "regret_pioful_mean",
               "regret_pioful_stderr"};
  for (std::size_t i = 0; i < summary.mean_oful.size(); ++i)
    t.rows.push_back({csv_cell(static_cast<long>(i + 1)), csv_cell(summary.mean_oful[i]),
                      csv_cell(summary.stderr_oful[i]), csv_cell(summary.mean_pi[i]),
                      csv_cell(summary.stderr_pi[i])});
  write_csv_file(t, out + "/regret_curves.csv");

  json j{{"seeds", num_seeds},
         {"bound_oful", summary.bound_oful},
         {"bound_pioful", summary.bound_pi},
         {"final_regret_oful_mean", summary.final_mean_oful()},
         {"final_regret_oful_stderr", summary.stderr_oful.back()},
         {"final_regret_pioful_mean", summary.final_mean_pi()},
         {"final_regret_pioful_stderr", summary.stderr_pi.back()},
         {"prior_distance_ratio", ratio}};
  write_json_file(j, out + "/regret_summary.json");
  write_run_manifest(out, "validate-regret", cfg, seeds);
  std::cout << "wrote " << out << "/regret_summary.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-constrained contextual-bandit router (PILOT + ON-MCKP)"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions opts;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the config seed list with one seed");
  app.add_option("--config", opts.config_path, "Run configuration JSON");
  app.add_option("--out", opts.out_override, "Output directory (overrides config 'out')");

  int (*handler)(const GlobalOptions&) = nullptr;
  auto wire = [&](const char* name, const char* desc, int (*fn)(const GlobalOptions&)) {
    app.add_subcommand(name, desc)->callback([&handler, fn] { handler = fn; });
  };
  wire("pretrain", "Train the projection and arm embeddings from preference data", cmd_pretrain);
  wire("tune", "Grid-search policy hyperparameters on the tuning bucket", cmd_tune);
  wire("replay-learn", "Run the learning-bucket bandit replay", cmd_replay_learn);
  wire("replay-deploy", "Learn, then deploy greedily under a budget", cmd_replay_deploy);
  wire("sweep-budget", "Deployment performance across a budget grid", cmd_sweep_budget);
  wire("shift", "Distribution-shift replay with probe-window metrics", cmd_shift);
  wire("report", "Re-render CSV/JSON outputs from stored reports", cmd_report);
  wire("validate-regret", "OFUL vs PI-OFUL synthetic regret comparison", cmd_validate_regret);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    json err{{"error", e.what()}, {"context", {{"kind", "usage"}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
  if (seed_opt->count() > 0) opts.seed_override = seed_value;

  try {
    return handler(opts);
  } catch (const ConfigError& e) {
    json err{{"error", e.what()}, {"context", {{"kind", "config"}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    json err{{"error", e.what()}, {"context", {{"kind", "runtime"}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
