#include "pilot/report_io.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pilot {

using nlohmann::json;

json report_to_json(const ReplayReport& rep) {
  json spend = json::array();
  for (const SpendStep& s : rep.spend_trace) {
    spend.push_back(json{{"t", s.t},
                         {"bin", s.bin},
                         {"arm", s.arm},
                         {"cost", s.cost},
                         {"budget_left", s.budget_left},
                         {"z", s.z}});
  }
  return json{{"policy", rep.policy_name},
              {"seed", rep.seed},
              {"steps", rep.steps},
              {"cumulative_reward", rep.cumulative_reward},
              {"cumulative_regret", rep.cumulative_regret},
              {"regret_curve", rep.regret_curve},
              {"reward_by_step", rep.reward_by_step},
              {"arm_counts", rep.arm_counts},
              {"spend_trace", std::move(spend)},
              {"deployment_performance", rep.deployment_performance},
              {"budget_used", rep.budget_used},
              {"terminated", rep.terminated},
              {"terminated_at", rep.terminated_at}};
}

ReplayReport report_from_json(const json& j) {
  ReplayReport rep;
  rep.policy_name = j.at("policy").get<std::string>();
  rep.seed = j.at("seed").get<std::uint64_t>();
  rep.steps = j.at("steps").get<long>();
  rep.cumulative_reward = j.at("cumulative_reward").get<double>();
  rep.cumulative_regret = j.at("cumulative_regret").get<double>();
  rep.regret_curve = j.at("regret_curve").get<std::vector<double>>();
  rep.reward_by_step = j.at("reward_by_step").get<std::vector<double>>();
  rep.arm_counts = j.at("arm_counts").get<std::vector<long>>();
  for (const json& s : j.at("spend_trace")) {
    rep.spend_trace.push_back(SpendStep{s.at("t").get<long>(), s.at("bin").get<long>(),
                                        s.at("arm").get<int>(), s.at("cost").get<double>(),
                                        s.at("budget_left").get<double>(),
                                        s.at("z").get<double>()});
  }
  rep.deployment_performance = j.at("deployment_performance").get<double>();
  rep.budget_used = j.at("budget_used").get<double>();
  rep.terminated = j.at("terminated").get<bool>();
  rep.terminated_at = j.at("terminated_at").get<long>();
  return rep;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << j.dump() << "\n";
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("invalid JSON in " + path + ": " + e.what());
  }
}

std::string csv_cell(double v) { return format_double(v); }
std::string csv_cell(long v) { return std::to_string(v); }

std::string render_csv(const CsvTable& table) {
  if (table.columns.empty()) throw Error("csv table has no columns");
  std::ostringstream out;
  out << "# " << table.comment << "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out << ",";
    out << table.columns[i];
  }
  out << "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw Error("csv row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ",";
      out << row[i];
    }
    out << "\n";
  }
  return out.str();
}

void write_csv_file(const CsvTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << render_csv(table);
}

SeriesAggregate aggregate_series(const std::vector<std::vector<double>>& runs) {
  if (runs.empty()) throw Error("empty input");
  const std::size_t n = runs[0].size();
  for (const auto& r : runs)
    if (r.size() != n) throw Error("series lengths differ across runs");
  SeriesAggregate agg;
  agg.mean.resize(n);
  agg.se.resize(n);
  std::vector<double> col(runs.size());
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < runs.size(); ++i) col[i] = runs[i][t];
    agg.mean[t] = mean_of(col);
    agg.se[t] = stderr_of(col);
  }
  return agg;
}

void emit_report(const std::vector<ReplayReport>& reports, const std::string& kind,
                 const std::string& out_dir) {
  if (reports.empty()) throw Error("empty input");
  std::filesystem::create_directories(out_dir);
  auto path_in = [&](const std::string& name) { return out_dir + "/" + name; };

  json all = json::array();
  for (const ReplayReport& r : reports) all.push_back(report_to_json(r));
  write_json_file(all, path_in("reports.json"));

  if (kind == "learning") {
    std::vector<std::vector<double>> regret, reward;
    for (const ReplayReport& r : reports) {
      regret.push_back(r.regret_curve);
      reward.push_back(r.reward_by_step);
    }
    SeriesAggregate ra = aggregate_series(regret);
    CsvTable rt;
    rt.comment = "cumulative regret per step; mean and standard error over " +
                 std::to_string(reports.size()) + " runs";
    rt.columns = {"t", "regret_mean", "regret_stderr"};
    for (std::size_t t = 0; t < ra.mean.size(); ++t)
      rt.rows.push_back({csv_cell(static_cast<long>(t)), csv_cell(ra.mean[t]), csv_cell(ra.se[t])});
    write_csv_file(rt, path_in("regret_curve.csv"));

    SeriesAggregate wa = aggregate_series(reward);
    CsvTable wt;
    wt.comment = "chosen-arm score per step; mean and standard error over " +
                 std::to_string(reports.size()) + " runs";
    wt.columns = {"t", "reward_mean", "reward_stderr"};
    for (std::size_t t = 0; t < wa.mean.size(); ++t)
      wt.rows.push_back({csv_cell(static_cast<long>(t)), csv_cell(wa.mean[t]), csv_cell(wa.se[t])});
    write_csv_file(wt, path_in("reward_curve.csv"));
  } else if (kind == "deployment") {
    CsvTable st;
    st.comment = "per-run deployment summary";
    st.columns = {"run", "seed", "performance", "budget_used", "terminated"};
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const ReplayReport& r = reports[i];
      st.rows.push_back({csv_cell(static_cast<long>(i)),
                         std::to_string(r.seed),
                         csv_cell(r.deployment_performance),
                         csv_cell(r.budget_used),
                         csv_cell(static_cast<long>(r.terminated ? 1 : 0))});
    }
    write_csv_file(st, path_in("summary.csv"));

    for (std::size_t i = 0; i < reports.size(); ++i) {
      CsvTable tt;
      tt.comment = "spend trace: query index, bin, chosen arm, cost, remaining budget, utilization";
      tt.columns = {"t", "bin", "chosen_arm", "cost", "B_left", "z"};
      for (const SpendStep& s : reports[i].spend_trace)
        tt.rows.push_back({csv_cell(s.t), csv_cell(s.bin), csv_cell(static_cast<long>(s.arm)),
                           csv_cell(s.cost), csv_cell(s.budget_left), csv_cell(s.z)});
      write_csv_file(tt, path_in("spend_trace_" + std::to_string(i) + ".csv"));
    }
  } else {
    throw ConfigError("unknown report kind: " + kind);
  }
}

std::string config_hash(const json& config) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(config.dump());
  return out.str();
}

void write_run_manifest(const std::string& out_dir, const std::string& command,
                        const json& config, const std::vector<std::uint64_t>& seeds) {
  std::filesystem::create_directories(out_dir);
  json j{{"command", command},
         {"config", config},
         {"config_hash", config_hash(config)},
         {"seeds", seeds},
         {"version", kVersion}};
  write_json_file(j, out_dir + "/manifest.json");
}

}  // namespace pilot
