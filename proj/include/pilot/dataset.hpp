#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pilot/common.hpp"

namespace pilot {

// One model in the routing pool. size_rank is a static total order over the
// pool (smaller = smaller model) used for hard-negative mining; it is declared
// in the dataset manifest, never inferred from per-query costs.
struct ArmId {
  int index = -1;
  std::string name;
  int size_rank = 0;

  friend bool operator==(const ArmId& a, const ArmId& b) {
    return a.index == b.index && a.name == b.name && a.size_rank == b.size_rank;
  }
};

// Optional per-arm pricing block from the manifest, consumed by
// estimate_query_cost.
struct ArmTokenStats {
  double input_price = 0.0;
  double output_price = 0.0;
  double mean_output_tokens = 0.0;
};

// One routed query: raw embedding x = phi(q), per-arm quality scores in [0,1]
// and per-arm costs in currency units. Embeddings are dataset inputs; this
// artifact never computes phi.
struct RoutingRecord {
  std::string query_id;
  Eigen::VectorXd embedding;
  Eigen::VectorXd scores;
  Eigen::VectorXd costs;
  std::optional<std::string> task_tag;
};

// One pairwise human preference (q, arm_i, arm_j, winner).
struct PreferenceRecord {
  std::string query_id;
  Eigen::VectorXd embedding;
  ArmId arm_i;
  ArmId arm_j;
  ArmId winner;
};

// Sidecar manifest: {"d_e": int, "arms": [{"name", "size_rank", and optional
// "input_price"/"output_price"/"mean_output_tokens"}]}.
struct DatasetManifest {
  int d_e = 0;
  std::vector<ArmId> arms;
  std::map<int, ArmTokenStats> token_stats;  // keyed by arm index, optional
};

struct Dataset {
  std::vector<RoutingRecord> records;
  std::vector<ArmId> arms;
  int d_e = 0;
  std::uint64_t split_seed = 0;

  int num_arms() const { return static_cast<int>(arms.size()); }
  std::size_t size() const { return records.size(); }
};

enum class DatasetFormat { jsonl, csv };

DatasetFormat dataset_format_from_string(const std::string& s);

// Default sidecar path: foo.jsonl -> foo.manifest.json.
std::string manifest_path_for(const std::string& dataset_path);

DatasetManifest load_arm_manifest(const std::string& path);
void write_arm_manifest(const DatasetManifest& m, const std::string& path);

// Loads and validates a routing dataset. Record order is preserved as file
// order. manifest_path empty means "use the sidecar convention".
Dataset load_routing_dataset(const std::string& path, DatasetFormat format,
                             const std::string& manifest_path = "");

// Writes records plus the sidecar manifest. write(load(p)) is byte-equivalent
// to a canonical serialization (sorted JSON keys, shortest float form).
void write_routing_dataset(const Dataset& d, const std::string& path,
                           DatasetFormat format,
                           const std::string& manifest_path = "");

std::vector<PreferenceRecord> load_preferences(const std::string& path,
                                               const DatasetManifest& manifest);
void write_preferences(const std::vector<PreferenceRecord>& prefs,
                       const std::string& path);

struct SplitBuckets {
  Dataset tuning;
  Dataset learning;
  Dataset deployment;
};

// Seed-deterministic disjoint partition. tuning gets exactly tuning_n records;
// the remainder is split learn:deploy by the integer ratio, with leftover
// records assigned to the learning bucket.
SplitBuckets split_buckets(const Dataset& d, std::size_t tuning_n,
                           int learn_ratio, int deploy_ratio,
                           std::uint64_t seed);

}  // namespace pilot
