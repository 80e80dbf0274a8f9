#include "zpd/core_data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "zpd/error.hpp"
#include "zpd/jsonl.hpp"
#include "zpd/rng.hpp"

namespace zpd {

using nlohmann::json;

std::string task_name(Task t) { return t == Task::Mathqa ? "mathqa" : "stance"; }

Task task_from_name(const std::string& s) {
  if (s == "mathqa") return Task::Mathqa;
  if (s == "stance") return Task::Stance;
  throw Error("unknown task: " + s);
}

std::string setting_name(Setting s) { return s == Setting::DP ? "DP" : "ICL"; }

Setting setting_from_name(const std::string& s) {
  if (s == "DP") return Setting::DP;
  if (s == "ICL") return Setting::ICL;
  throw Error("unknown setting: " + s);
}

std::string split_part_name(SplitPart p) {
  switch (p) {
    case SplitPart::Train: return "train";
    case SplitPart::Val: return "val";
    default: return "test";
  }
}

SplitPart split_part_from_name(const std::string& s) {
  if (s == "train") return SplitPart::Train;
  if (s == "val") return SplitPart::Val;
  if (s == "test") return SplitPart::Test;
  throw Error("unknown split part: " + s);
}

const ResponseRecord* ResponseSet::find(const std::string& model_id,
                                        const std::string& example_id, Setting setting) const {
  for (const auto& r : records) {
    if (r.model_id == model_id && r.example_id == example_id && r.setting == setting) return &r;
  }
  return nullptr;
}

std::vector<std::string> ResponseSet::example_ids() const {
  std::vector<std::string> ids;
  ids.reserve(queries.size());
  for (const auto& [id, q] : queries) ids.push_back(id);
  return ids;
}

std::map<std::string, Query> load_queries(const std::string& path) {
  std::map<std::string, Query> queries;
  for_each_jsonl(path, [&](const json& j, size_t lineno) {
    Query q;
    try {
      q.example_id = j.at("example_id").get<std::string>();
      q.task = task_from_name(j.at("task").get<std::string>());
      q.input_text = j.at("input_text").get<std::string>();
      q.gold_answer = j.at("gold_answer").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(lineno) + ": bad query record: " + e.what());
    }
    if (queries.count(q.example_id)) {
      throw Error(path + ":" + std::to_string(lineno) + ": duplicate example_id " + q.example_id);
    }
    queries.emplace(q.example_id, std::move(q));
  });
  return queries;
}

void save_queries(const std::string& path, const std::map<std::string, Query>& queries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  for (const auto& [id, q] : queries) {
    json j{{"example_id", q.example_id},
           {"task", task_name(q.task)},
           {"input_text", q.input_text},
           {"gold_answer", q.gold_answer}};
    out << j.dump() << "\n";
  }
}

ResponseSet load_response_set(const std::string& responses_path,
                              std::map<std::string, Query> queries) {
  ResponseSet rs;
  rs.queries = std::move(queries);
  std::set<std::tuple<std::string, std::string, Setting>> seen;
  std::set<std::string> model_set;
  for_each_jsonl(responses_path, [&](const json& j, size_t lineno) {
    ResponseRecord r;
    try {
      r.model_id = j.at("model_id").get<std::string>();
      r.example_id = j.at("example_id").get<std::string>();
      r.setting = setting_from_name(j.at("setting").get<std::string>());
      r.prompt_text = j.at("prompt_text").get<std::string>();
      r.raw_output = j.at("raw_output").get<std::string>();
      r.label = j.at("label").get<int>();
      r.prompt_token_count = j.at("prompt_token_count").get<long>();
    } catch (const json::exception& e) {
      throw Error(responses_path + ":" + std::to_string(lineno) +
                  ": bad response record: " + e.what());
    }
    if (r.label != 0 && r.label != 1) {
      throw Error(responses_path + ":" + std::to_string(lineno) +
                  ": label must be 0 or 1, got " + std::to_string(r.label));
    }
    if (r.prompt_token_count < 0) {
      throw Error(responses_path + ":" + std::to_string(lineno) +
                  ": negative prompt_token_count");
    }
    auto key = std::make_tuple(r.model_id, r.example_id, r.setting);
    if (!seen.insert(key).second) {
      throw Error(responses_path + ":" + std::to_string(lineno) + ": duplicate record key (" +
                  r.model_id + ", " + r.example_id + ", " + setting_name(r.setting) + ")");
    }
    if (!rs.queries.count(r.example_id)) {
      throw Error(responses_path + ":" + std::to_string(lineno) + ": example_id " +
                  r.example_id + " not present in the query manifest");
    }
    model_set.insert(r.model_id);
    rs.records.push_back(std::move(r));
  });
  rs.models.assign(model_set.begin(), model_set.end());
  return rs;
}

std::string serialize_response_record(const ResponseRecord& r) {
  json j{{"model_id", r.model_id},
         {"example_id", r.example_id},
         {"setting", setting_name(r.setting)},
         {"prompt_text", r.prompt_text},
         {"raw_output", r.raw_output},
         {"label", r.label},
         {"prompt_token_count", r.prompt_token_count}};
  return j.dump();
}

void save_response_set(const std::string& path, const ResponseSet& rs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  for (const auto& r : rs.records) out << serialize_response_record(r) << "\n";
}

void append_response_record(const std::string& path, const ResponseRecord& r) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot write file: " + path);
  out << serialize_response_record(r) << "\n";
  out.flush();
}

ValidationReport validate_response_set(const ResponseSet& rs) {
  ValidationReport report;
  std::map<std::tuple<std::string, std::string>, std::pair<bool, bool>> pairs;
  for (const auto& r : rs.records) {
    auto& p = pairs[std::make_tuple(r.model_id, r.example_id)];
    if (r.setting == Setting::DP) p.first = true;
    else p.second = true;
    auto& stats = report.label_stats[{r.model_id, r.setting}];
    stats.n += 1;
    stats.correct += r.label;
  }
  for (const auto& [key, present] : pairs) {
    const auto& [model_id, example_id] = key;
    if (!present.first) report.missing.push_back({model_id, example_id, Setting::DP});
    if (!present.second) report.missing.push_back({model_id, example_id, Setting::ICL});
  }
  for (const auto& [id, q] : rs.queries) {
    if (!q.embedding.has_value()) report.missing_embeddings.push_back(id);
  }
  return report;
}

SplitAssignment split_dataset(const ResponseSet& rs, const std::array<double, 3>& ratios,
                              uint64_t seed) {
  for (double r : ratios) {
    if (r < 0.0) throw Error("split ratios must be nonnegative");
  }
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw Error("split ratios must sum to 1, got " + std::to_string(sum));
  }
  std::vector<std::string> ids = rs.example_ids();
  SplitMix64 rng(seed);
  rng.shuffle(ids);

  const size_t n = ids.size();
  const size_t n_val = static_cast<size_t>(std::floor(static_cast<double>(n) * ratios[1]));
  const size_t n_test = static_cast<size_t>(std::floor(static_cast<double>(n) * ratios[2]));
  const size_t n_train = n - n_val - n_test;  // floor(n*r0) plus the remainder

  SplitAssignment split;
  split.seed = seed;
  split.ratios = ratios;
  for (size_t i = 0; i < n; ++i) {
    SplitPart part = i < n_train              ? SplitPart::Train
                     : i < n_train + n_val    ? SplitPart::Val
                                              : SplitPart::Test;
    split.assignment.emplace(ids[i], part);
  }
  return split;
}

void save_split(const std::string& path, const SplitAssignment& split) {
  json assignment = json::object();
  for (const auto& [id, part] : split.assignment) assignment[id] = split_part_name(part);
  json j{{"seed", split.seed},
         {"ratios", split.ratios},
         {"assignment", assignment}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

SplitAssignment load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(path + ": parse error: " + std::string(e.what()));
  }
  SplitAssignment split;
  split.seed = j.at("seed").get<uint64_t>();
  auto r = j.at("ratios");
  split.ratios = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()};
  for (const auto& [id, part] : j.at("assignment").items()) {
    split.assignment.emplace(id, split_part_from_name(part.get<std::string>()));
  }
  return split;
}

}  // namespace zpd
