#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "pilot/dataset.hpp"
#include "pilot/report_io.hpp"
#include "test_support.hpp"

using namespace pilot;
using nlohmann::json;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const testsup::TempDir& dir, const std::string& args) {
  std::string out_f = dir.file("stdout.txt");
  std::string err_f = dir.file("stderr.txt");
  std::string cmd =
      std::string(PILOT_CLI_PATH) + " " + args + " >" + out_f + " 2>" + err_f;
  int rc = std::system(cmd.c_str());
  CliResult res;
  res.code = rc == -1 ? -1 : WEXITSTATUS(rc);
  res.out = testsup::read_text(out_f);
  res.err = testsup::read_text(err_f);
  return res;
}

// Routing data + preferences + a pretrained model, shared by the subcommand
// flows below.
struct CliFixture {
  testsup::TempDir dir;
  std::string data_path;
  std::string manifest_path;
  std::string prefs_path;
  std::string model_path;

  CliFixture() {
    testsup::ClusterSpec spec;
    spec.n = 600;
    spec.d_e = 8;
    Dataset d = testsup::make_clustered_dataset(spec, 77);
    data_path = dir.file("routing.jsonl");
    write_routing_dataset(d, data_path, DatasetFormat::jsonl);
    manifest_path = manifest_path_for(data_path);
    write_preferences(testsup::make_clustered_prefs(spec, 200, 78), dir.file("prefs.jsonl"));
    prefs_path = dir.file("prefs.jsonl");

    json cfg{{"preferences", prefs_path},
             {"manifest", manifest_path},
             {"d_m", 4},
             {"pretrain", {{"epochs", 5}, {"learning_rate", 0.05}}},
             {"out", dir.file("model_out")}};
    write_json_file(cfg, dir.file("pretrain.json"));
    CliResult res = run_cli(dir, "pretrain --config " + dir.file("pretrain.json"));
    REQUIRE(res.code == 0);
    model_path = dir.file("model_out") + "/model.json";
    REQUIRE(std::filesystem::exists(model_path));
  }

  json base_cfg(const std::string& out_name) const {
    return json{{"dataset", {{"path", data_path}}},
                {"model", model_path},
                {"split", {{"tuning_n", 100}}},
                {"out", dir.file(out_name)}};
  }

  std::string write_cfg(const json& cfg, const std::string& name) const {
    write_json_file(cfg, dir.file(name));
    return dir.file(name);
  }
};

}  // namespace

TEST_CASE("usage and config errors exit 2 with a JSON diagnostic") {
  testsup::TempDir dir;

  CliResult no_sub = run_cli(dir, "");
  CHECK(no_sub.code == 2);
  json usage = json::parse(no_sub.err);
  CHECK(usage.at("context").at("kind") == "usage");

  CliResult missing = run_cli(dir, "tune --config " + dir.file("nope.json"));
  CHECK(missing.code == 2);
  json err = json::parse(missing.err);
  CHECK(err.at("context").at("kind") == "config");
  CHECK(err.at("error").get<std::string>().find(dir.file("nope.json")) != std::string::npos);

  CliResult no_cfg = run_cli(dir, "tune");
  CHECK(no_cfg.code == 2);
  CHECK(json::parse(no_cfg.err).at("error") == "--config is required");

  CliResult bad_flag = run_cli(dir, "tune --bogus");
  CHECK(bad_flag.code == 2);
}

TEST_CASE("pretrain emits a model, a summary, and a run manifest") {
  CliFixture fx;  // the constructor already ran pretrain
  std::string out = fx.dir.file("model_out");
  CHECK(std::filesystem::exists(out + "/pretrain_summary.json"));
  CHECK(std::filesystem::exists(out + "/manifest.json"));

  json summary = read_json_file(out + "/pretrain_summary.json");
  CHECK(summary.at("arms").get<int>() == 4);
  CHECK(summary.at("preferences").get<int>() == 200);
  REQUIRE(summary.at("accuracy").is_array());
  CHECK(summary.at("accuracy").size() == 4);

  json manifest = read_json_file(out + "/manifest.json");
  CHECK(manifest.at("command") == "pretrain");
  CHECK(manifest.contains("config_hash"));

  ModelArtifact model = load_model_artifact(fx.model_path);
  CHECK(model.proj.d_m == 4);
  CHECK(model.emb.num_arms() == 4);
}

TEST_CASE("tune writes the grid table and the winning spec") {
  CliFixture fx;
  json cfg = fx.base_cfg("tune_out");
  cfg["policy"] = {{"kind", "linucb"}};
  cfg["grids"] = {{"alpha", {0.5, 2.0}}};
  CliResult res = run_cli(fx.dir, "tune --config " + fx.write_cfg(cfg, "tune.json"));
  REQUIRE(res.code == 0);
  CHECK(res.out.find("best_hyperparams.json") != std::string::npos);

  json best = read_json_file(fx.dir.file("tune_out") + "/best_hyperparams.json");
  REQUIRE(best.at("alpha_table").size() == 2);
  CHECK(best.at("alpha_table")[0].at("alpha").get<double>() == 0.5);
  double won = best.at("policy").at("alpha").get<double>();
  CHECK((won == 0.5 || won == 2.0));
  double top = std::max(best.at("alpha_table")[0].at("reward").get<double>(),
                        best.at("alpha_table")[1].at("reward").get<double>());
  CHECK(best.at("best_reward").get<double>() == doctest::Approx(top));
}

TEST_CASE("replay-learn writes reports, curves, and checkpoints per seed") {
  CliFixture fx;
  json cfg = fx.base_cfg("learn_out");
  cfg["policy"] = {{"kind", "pilot"}, {"alpha", 1.0}};
  cfg["seeds"] = {1, 2};
  CliResult res = run_cli(fx.dir, "replay-learn --config " + fx.write_cfg(cfg, "learn.json"));
  REQUIRE(res.code == 0);

  std::string out = fx.dir.file("learn_out");
  json reports = read_json_file(out + "/reports.json");
  REQUIRE(reports.is_array());
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].at("seed").get<std::uint64_t>() == 1);
  CHECK(reports[0].at("policy") == "pilot");
  CHECK(reports[0].at("steps").get<long>() > 0);
  CHECK(std::filesystem::exists(out + "/regret_curve.csv"));
  CHECK(std::filesystem::exists(out + "/reward_curve.csv"));
  CHECK(std::filesystem::exists(out + "/checkpoint_1.json"));
  CHECK(std::filesystem::exists(out + "/checkpoint_2.json"));

  // same config, fresh output dir: byte-identical reports
  CliResult again = run_cli(fx.dir, "replay-learn --config " + fx.dir.file("learn.json") +
                                        " --out " + fx.dir.file("learn_out2"));
  REQUIRE(again.code == 0);
  CHECK(testsup::read_text(out + "/reports.json") ==
        testsup::read_text(fx.dir.file("learn_out2") + "/reports.json"));

  // --seed overrides the config's seed list with a single run
  CliResult single = run_cli(fx.dir, "replay-learn --seed 9 --config " + fx.dir.file("learn.json") +
                                         " --out " + fx.dir.file("learn_out3"));
  REQUIRE(single.code == 0);
  json one = read_json_file(fx.dir.file("learn_out3") + "/reports.json");
  REQUIRE(one.size() == 1);
  CHECK(one[0].at("seed").get<std::uint64_t>() == 9);
}

TEST_CASE("replay-deploy writes the deployment summary and spend traces") {
  CliFixture fx;
  json cfg = fx.base_cfg("deploy_out");
  cfg["policy"] = {{"kind", "linucb"}, {"alpha", 1.0}};
  cfg["cost"] = {{"budget", 1.0}, {"bin_size", 20}};  // bounds estimated from tuning
  CliResult res = run_cli(fx.dir, "replay-deploy --config " + fx.write_cfg(cfg, "deploy.json"));
  REQUIRE(res.code == 0);

  std::string out = fx.dir.file("deploy_out");
  json reports = read_json_file(out + "/reports.json");
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].at("deployment_performance").get<double>() > 0.0);
  CHECK(reports[0].at("budget_used").get<double>() <= 1.0 + 1e-9);
  CHECK(reports[0].at("terminated").get<bool>() == false);
  std::string summary = testsup::read_text(out + "/summary.csv");
  CHECK(summary.find("run,seed,performance,budget_used,terminated\n") != std::string::npos);
  CHECK(std::filesystem::exists(out + "/spend_trace_0.csv"));
}

TEST_CASE("sweep-budget emits one table row per budget") {
  CliFixture fx;
  json cfg = fx.base_cfg("sweep_out");
  cfg["policy"] = {{"kind", "linucb"}, {"alpha", 1.0}};
  cfg["cost"] = {{"bin_size", 20}};
  cfg["budgets"] = {0.02, 0.1, 0.5, 1.0};
  cfg["seeds"] = {1, 2};
  CliResult res = run_cli(fx.dir, "sweep-budget --config " + fx.write_cfg(cfg, "sweep.json"));
  REQUIRE(res.code == 0);

  json table = read_json_file(fx.dir.file("sweep_out") + "/budget_table.json");
  REQUIRE(table.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(table[i].at("budget").get<double>() == doctest::Approx(cfg["budgets"][i].get<double>()));

  std::string csv = testsup::read_text(fx.dir.file("sweep_out") + "/budget_table.csv");
  long rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == 2 + 4);  // comment + header + one row per budget
  CHECK(csv.find("budget,performance_mean,performance_stderr,budget_used_mean,terminated_runs\n") !=
        std::string::npos);
}

TEST_CASE("shift summarizes before/during/after probe windows") {
  CliFixture fx;
  auto [a, b] = testsup::make_flip_streams(400, 400, 8, 5);
  write_routing_dataset(a, fx.dir.file("stream_a.jsonl"), DatasetFormat::jsonl);
  write_routing_dataset(b, fx.dir.file("stream_b.jsonl"), DatasetFormat::jsonl);

  json cfg{{"model", fx.model_path},
           {"policy", {{"kind", "linucb"}, {"alpha", 1.0}}},
           {"shift",
            {{"stream_a", {{"path", fx.dir.file("stream_a.jsonl")}}},
             {"stream_b", {{"path", fx.dir.file("stream_b.jsonl")}}},
             {"probe_window", 100}}},
           {"seeds", {1, 2}},
           {"out", fx.dir.file("shift_out")}};
  CliResult res = run_cli(fx.dir, "shift --config " + fx.write_cfg(cfg, "shift.json"));
  REQUIRE(res.code == 0);

  std::string summary = testsup::read_text(fx.dir.file("shift_out") + "/shift_summary.csv");
  CHECK(summary.find("\nbefore,") != std::string::npos);
  CHECK(summary.find("\nduring,") != std::string::npos);
  CHECK(summary.find("\nafter,") != std::string::npos);
  std::string series = testsup::read_text(fx.dir.file("shift_out") + "/shift_series.csv");
  long rows = std::count(series.begin(), series.end(), '\n');
  CHECK(rows == 2 + 800);  // comment + header + one row per step
}

TEST_CASE("validate-regret runs the synthetic comparison end to end") {
  testsup::TempDir dir;
  json cfg{{"regret",
            {{"d", 3}, {"actions", 4}, {"horizon", 60}, {"num_seeds", 3}, {"noise_scale", 0.1}}},
           {"out", dir.file("vr_out")}};
  write_json_file(cfg, dir.file("vr.json"));
  CliResult res = run_cli(dir, "validate-regret --config " + dir.file("vr.json"));
  REQUIRE(res.code == 0);

  json summary = read_json_file(dir.file("vr_out") + "/regret_summary.json");
  CHECK(summary.at("seeds").get<int>() == 3);
  CHECK(summary.at("bound_pioful").get<double>() < summary.at("bound_oful").get<double>());
  CHECK(summary.at("final_regret_oful_mean").get<double>() >= 0.0);
  std::string curves = testsup::read_text(dir.file("vr_out") + "/regret_curves.csv");
  long rows = std::count(curves.begin(), curves.end(), '\n');
  CHECK(rows == 2 + 60);
}

TEST_CASE("report re-renders stored reports byte-identically") {
  CliFixture fx;
  json cfg = fx.base_cfg("learn_out");
  cfg["policy"] = {{"kind", "linucb"}};
  cfg["seeds"] = {3, 4};
  REQUIRE(run_cli(fx.dir, "replay-learn --config " + fx.write_cfg(cfg, "learn.json")).code == 0);

  json rcfg{{"reports", fx.dir.file("learn_out") + "/reports.json"},
            {"kind", "learning"},
            {"out", fx.dir.file("rerender_out")}};
  CliResult res = run_cli(fx.dir, "report --config " + fx.write_cfg(rcfg, "report.json"));
  REQUIRE(res.code == 0);
  CHECK(testsup::read_text(fx.dir.file("rerender_out") + "/regret_curve.csv") ==
        testsup::read_text(fx.dir.file("learn_out") + "/regret_curve.csv"));
  CHECK(testsup::read_text(fx.dir.file("rerender_out") + "/reports.json") ==
        testsup::read_text(fx.dir.file("learn_out") + "/reports.json"));
}
