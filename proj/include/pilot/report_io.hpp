#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "pilot/replay.hpp"

namespace pilot {

nlohmann::json report_to_json(const ReplayReport& rep);
ReplayReport report_from_json(const nlohmann::json& j);

// Writes compact JSON with a trailing newline. nlohmann keeps object keys
// sorted, so identical inputs serialize byte-identically.
void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

// CSV with a leading "# ..." comment row documenting the columns. All numbers
// go through the shortest round-trip formatter.
struct CsvTable {
  std::string comment;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

std::string render_csv(const CsvTable& table);
void write_csv_file(const CsvTable& table, const std::string& path);

std::string csv_cell(double v);
std::string csv_cell(long v);

// Pointwise mean and standard error across runs; all curves must share one
// length.
struct SeriesAggregate {
  std::vector<double> mean;
  std::vector<double> se;
};

SeriesAggregate aggregate_series(const std::vector<std::vector<double>>& runs);

// Emits the per-run JSON plus plottable CSV series under out_dir.
// kind "learning": reports.json, regret_curve.csv, reward_curve.csv.
// kind "deployment": reports.json, summary.csv, spend_trace_<i>.csv per run.
void emit_report(const std::vector<ReplayReport>& reports, const std::string& kind,
                 const std::string& out_dir);

// FNV-1a over the canonical (sorted-key, compact) dump.
std::string config_hash(const nlohmann::json& config);

// manifest.json: subcommand, config + its hash, seeds, artifact version.
void write_run_manifest(const std::string& out_dir, const std::string& command,
                        const nlohmann::json& config,
                        const std::vector<std::uint64_t>& seeds);

}  // namespace pilot
