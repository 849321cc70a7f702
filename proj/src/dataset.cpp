#include "pilot/dataset.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pilot {

using nlohmann::json;

namespace {

std::string line_err(const std::string& msg, std::size_t line_no) {
  return msg + " at line " + std::to_string(line_no);
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  return in;
}

Eigen::VectorXd vector_field(const json& j, const char* key, std::size_t line_no) {
  if (!j.contains(key)) throw Error(line_err(std::string("missing field '") + key + "'", line_no));
  const json& arr = j.at(key);
  if (!arr.is_array()) throw Error(line_err(std::string("field '") + key + "' is not an array", line_no));
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw Error(line_err(std::string("non-numeric entry in '") + key + "'", line_no));
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

std::string string_field(const json& j, const char* key, std::size_t line_no) {
  if (!j.contains(key)) throw Error(line_err(std::string("missing field '") + key + "'", line_no));
  if (!j.at(key).is_string()) throw Error(line_err(std::string("field '") + key + "' is not a string", line_no));
  return j.at(key).get<std::string>();
}

void validate_record(const RoutingRecord& r, int d_e, int k, std::size_t line_no) {
  if (r.embedding.size() != d_e) throw Error(line_err("embedding length mismatch", line_no));
  if (r.scores.size() != k) throw Error(line_err("scores length mismatch", line_no));
  if (r.costs.size() != k) throw Error(line_err("costs length mismatch", line_no));
  for (Eigen::Index i = 0; i < r.scores.size(); ++i) {
    if (!std::isfinite(r.scores[i]) || r.scores[i] < 0.0 || r.scores[i] > 1.0)
      throw Error(line_err("score out of range", line_no));
  }
  for (Eigen::Index i = 0; i < r.costs.size(); ++i) {
    if (!std::isfinite(r.costs[i]) || r.costs[i] < 0.0)
      throw Error(line_err("negative cost", line_no));
  }
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || end != begin + s.size())
    throw Error(line_err("malformed number '" + s + "'", line_no));
  return v;
}

std::string csv_header(int d_e, int k) {
  std::ostringstream h;
  h << "query_id";
  for (int i = 0; i < d_e; ++i) h << ",e" << i;
  for (int i = 0; i < k; ++i) h << ",s" << i;
  for (int i = 0; i < k; ++i) h << ",c" << i;
  h << ",task_tag";
  return h.str();
}

Dataset load_jsonl(const std::string& path, const DatasetManifest& m) {
  std::ifstream in = open_or_throw(path);
  Dataset d;
  d.arms = m.arms;
  d.d_e = m.d_e;
  const int k = static_cast<int>(m.arms.size());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(line_err(std::string("invalid JSON (") + e.what() + ")", line_no));
    }
    RoutingRecord r;
    r.query_id = string_field(j, "query_id", line_no);
    r.embedding = vector_field(j, "embedding", line_no);
    r.scores = vector_field(j, "scores", line_no);
    r.costs = vector_field(j, "costs", line_no);
    if (j.contains("task_tag") && !j.at("task_tag").is_null())
      r.task_tag = string_field(j, "task_tag", line_no);
    validate_record(r, d.d_e, k, line_no);
    d.records.push_back(std::move(r));
  }
  if (d.records.empty()) throw Error("empty dataset");
  return d;
}

Dataset load_csv(const std::string& path, const DatasetManifest& m) {
  std::ifstream in = open_or_throw(path);
  Dataset d;
  d.arms = m.arms;
  d.d_e = m.d_e;
  const int k = static_cast<int>(m.arms.size());
  const std::string expected_header = csv_header(m.d_e, k);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty dataset");
  if (line != expected_header)
    throw Error("csv header mismatch; expected: " + expected_header);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    const std::size_t expect = 1 + static_cast<std::size_t>(m.d_e) + 2 * static_cast<std::size_t>(k) + 1;
    if (cells.size() != expect) throw Error(line_err("wrong column count", line_no));
    RoutingRecord r;
    r.query_id = cells[0];
    r.embedding.resize(m.d_e);
    r.scores.resize(k);
    r.costs.resize(k);
    std::size_t c = 1;
    for (int i = 0; i < m.d_e; ++i) r.embedding[i] = parse_double(cells[c++], line_no);
    for (int i = 0; i < k; ++i) r.scores[i] = parse_double(cells[c++], line_no);
    for (int i = 0; i < k; ++i) r.costs[i] = parse_double(cells[c++], line_no);
    if (!cells[c].empty()) r.task_tag = cells[c];
    validate_record(r, d.d_e, k, line_no);
    d.records.push_back(std::move(r));
  }
  if (d.records.empty()) throw Error("empty dataset");
  return d;
}

}  // namespace

DatasetFormat dataset_format_from_string(const std::string& s) {
  if (s == "jsonl") return DatasetFormat::jsonl;
  if (s == "csv") return DatasetFormat::csv;
  throw ConfigError("unknown dataset format: " + s);
}

std::string manifest_path_for(const std::string& dataset_path) {
  auto dot = dataset_path.find_last_of('.');
  auto slash = dataset_path.find_last_of('/');
  std::string stem = (dot == std::string::npos || (slash != std::string::npos && dot < slash))
                         ? dataset_path
                         : dataset_path.substr(0, dot);
  return stem + ".manifest.json";
}

DatasetManifest load_arm_manifest(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("invalid manifest JSON in " + path + ": " + e.what());
  }
  DatasetManifest m;
  if (!j.contains("d_e") || !j.at("d_e").is_number_integer())
    throw Error("manifest missing integer field 'd_e'");
  m.d_e = j.at("d_e").get<int>();
  if (m.d_e < 1) throw Error("manifest d_e must be >= 1");
  if (!j.contains("arms") || !j.at("arms").is_array() || j.at("arms").empty())
    throw Error("manifest missing non-empty 'arms' array");
  std::map<std::string, int> names;
  std::map<int, int> ranks;
  int index = 0;
  for (const json& aj : j.at("arms")) {
    ArmId a;
    a.index = index;
    a.name = string_field(aj, "name", 0);
    if (!aj.contains("size_rank") || !aj.at("size_rank").is_number_integer())
      throw Error("manifest arm '" + a.name + "' missing integer 'size_rank'");
    a.size_rank = aj.at("size_rank").get<int>();
    if (!names.emplace(a.name, index).second)
      throw Error("duplicate arm name '" + a.name + "' in manifest");
    if (!ranks.emplace(a.size_rank, index).second)
      throw Error("duplicate size_rank in manifest (ties forbidden)");
    const bool has_pricing = aj.contains("input_price") || aj.contains("output_price") ||
                             aj.contains("mean_output_tokens");
    if (has_pricing) {
      if (!(aj.contains("input_price") && aj.contains("output_price") &&
            aj.contains("mean_output_tokens")))
        throw Error("incomplete pricing block for arm '" + a.name + "'");
      ArmTokenStats ts;
      ts.input_price = aj.at("input_price").get<double>();
      ts.output_price = aj.at("output_price").get<double>();
      ts.mean_output_tokens = aj.at("mean_output_tokens").get<double>();
      m.token_stats[index] = ts;
    }
    m.arms.push_back(std::move(a));
    ++index;
  }
  return m;
}

void write_arm_manifest(const DatasetManifest& m, const std::string& path) {
  json arms = json::array();
  for (const ArmId& a : m.arms) {
    json aj{{"name", a.name}, {"size_rank", a.size_rank}};
    auto it = m.token_stats.find(a.index);
    if (it != m.token_stats.end()) {
      aj["input_price"] = it->second.input_price;
      aj["output_price"] = it->second.output_price;
      aj["mean_output_tokens"] = it->second.mean_output_tokens;
    }
    arms.push_back(std::move(aj));
  }
  json j{{"d_e", m.d_e}, {"arms", std::move(arms)}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

Dataset load_routing_dataset(const std::string& path, DatasetFormat format,
                             const std::string& manifest_path) {
  std::string mpath = manifest_path.empty() ? manifest_path_for(path) : manifest_path;
  DatasetManifest m = load_arm_manifest(mpath);
  return format == DatasetFormat::jsonl ? load_jsonl(path, m) : load_csv(path, m);
}

void write_routing_dataset(const Dataset& d, const std::string& path,
                           DatasetFormat format, const std::string& manifest_path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  if (format == DatasetFormat::jsonl) {
    for (const RoutingRecord& r : d.records) {
      json j{{"query_id", r.query_id},
             {"embedding", vector_to_json(r.embedding)},
             {"scores", vector_to_json(r.scores)},
             {"costs", vector_to_json(r.costs)}};
      if (r.task_tag) j["task_tag"] = *r.task_tag;
      out << j.dump() << "\n";
    }
  } else {
    const int k = d.num_arms();
    out << csv_header(d.d_e, k) << "\n";
    for (const RoutingRecord& r : d.records) {
      out << r.query_id;
      for (Eigen::Index i = 0; i < r.embedding.size(); ++i) out << "," << format_double(r.embedding[i]);
      for (Eigen::Index i = 0; i < r.scores.size(); ++i) out << "," << format_double(r.scores[i]);
      for (Eigen::Index i = 0; i < r.costs.size(); ++i) out << "," << format_double(r.costs[i]);
      out << "," << (r.task_tag ? *r.task_tag : "") << "\n";
    }
  }
  DatasetManifest m;
  m.d_e = d.d_e;
  m.arms = d.arms;
  std::string mpath = manifest_path.empty() ? manifest_path_for(path) : manifest_path;
  write_arm_manifest(m, mpath);
}

std::vector<PreferenceRecord> load_preferences(const std::string& path,
                                               const DatasetManifest& manifest) {
  std::ifstream in = open_or_throw(path);
  std::map<std::string, const ArmId*> by_name;
  for (const ArmId& a : manifest.arms) by_name[a.name] = &a;
  std::vector<PreferenceRecord> prefs;
  std::string line;
  std::size_t line_no = 0;
  auto resolve = [&](const std::string& name, std::size_t ln) -> const ArmId& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(line_err("unknown arm '" + name + "'", ln));
    return *it->second;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(line_err(std::string("invalid JSON (") + e.what() + ")", line_no));
    }
    PreferenceRecord p;
    p.query_id = string_field(j, "query_id", line_no);
    p.embedding = vector_field(j, "embedding", line_no);
    if (p.embedding.size() != manifest.d_e)
      throw Error(line_err("embedding length mismatch", line_no));
    p.arm_i = resolve(string_field(j, "arm_i", line_no), line_no);
    p.arm_j = resolve(string_field(j, "arm_j", line_no), line_no);
    p.winner = resolve(string_field(j, "winner", line_no), line_no);
    if (p.arm_i.index == p.arm_j.index) throw Error(line_err("identical arms", line_no));
    if (p.winner.index != p.arm_i.index && p.winner.index != p.arm_j.index)
      throw Error(line_err("winner not in pair", line_no));
    prefs.push_back(std::move(p));
  }
  if (prefs.empty()) throw Error("empty preference set");
  return prefs;
}

void write_preferences(const std::vector<PreferenceRecord>& prefs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  for (const PreferenceRecord& p : prefs) {
    json j{{"query_id", p.query_id},
           {"embedding", vector_to_json(p.embedding)},
           {"arm_i", p.arm_i.name},
           {"arm_j", p.arm_j.name},
           {"winner", p.winner.name}};
    out << j.dump() << "\n";
  }
}

SplitBuckets split_buckets(const Dataset& d, std::size_t tuning_n, int learn_ratio,
                           int deploy_ratio, std::uint64_t seed) {
  if (tuning_n >= d.records.size())
    throw Error("tuning_n must be smaller than the dataset size");
  if (learn_ratio < 1 || deploy_ratio < 1)
    throw ConfigError("split ratios must be positive integers");

  Rng rng(seed);
  std::vector<std::size_t> order = shuffled_indices(d.records.size(), rng);

  const std::size_t rem = d.records.size() - tuning_n;
  const std::size_t denom = static_cast<std::size_t>(learn_ratio) + static_cast<std::size_t>(deploy_ratio);
  const std::size_t deploy_n = rem / denom * static_cast<std::size_t>(deploy_ratio);
  const std::size_t learn_n = rem - deploy_n;  // leftover goes to learning

  auto take = [&](std::size_t begin, std::size_t count) {
    Dataset b;
    b.arms = d.arms;
    b.d_e = d.d_e;
    b.split_seed = seed;
    b.records.reserve(count);
    for (std::size_t i = 0; i < count; ++i) b.records.push_back(d.records[order[begin + i]]);
    return b;
  };

  SplitBuckets out;
  out.tuning = take(0, tuning_n);
  out.learning = take(tuning_n, learn_n);
  out.deployment = take(tuning_n + learn_n, deploy_n);
  return out;
}

}  // namespace pilot
