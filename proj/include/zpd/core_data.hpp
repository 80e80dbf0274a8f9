#pragma once
// Shared data model: queries, paired DP/ICL response records, and the
// query-level train/val/test split. All downstream analytics consume these.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace zpd {

enum class Task { Mathqa, Stance };
enum class Setting { DP, ICL };
enum class SplitPart { Train, Val, Test };

std::string task_name(Task t);
Task task_from_name(const std::string& s);
std::string setting_name(Setting s);
Setting setting_from_name(const std::string& s);
std::string split_part_name(SplitPart p);
SplitPart split_part_from_name(const std::string& s);

struct Query {
  std::string example_id;
  Task task = Task::Mathqa;
  std::string input_text;
  std::string gold_answer;
  std::optional<std::vector<float>> embedding;
};

struct ResponseRecord {
  std::string model_id;
  std::string example_id;
  Setting setting = Setting::DP;
  std::string prompt_text;
  std::string raw_output;
  int label = 0;  // binary correctness
  long prompt_token_count = 0;
};

// Immutable after load; safe for concurrent reads.
struct ResponseSet {
  std::vector<ResponseRecord> records;
  std::vector<std::string> models;  // sorted unique
  std::map<std::string, Query> queries;

  // nullptr when the (model, example, setting) triple is absent.
  const ResponseRecord* find(const std::string& model_id, const std::string& example_id,
                             Setting setting) const;
  std::vector<std::string> example_ids() const;  // sorted
};

struct SplitAssignment {
  std::map<std::string, SplitPart> assignment;
  uint64_t seed = 0;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
};

struct LabelStats {
  long n = 0;
  long correct = 0;
  double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / n; }
};

struct MissingPair {
  std::string model_id;
  std::string example_id;
  Setting missing;  // the setting that has no record
};

struct ValidationReport {
  std::vector<MissingPair> missing;
  std::map<std::pair<std::string, Setting>, LabelStats> label_stats;
  std::vector<std::string> missing_embeddings;
  bool paired() const { return missing.empty(); }
};

std::map<std::string, Query> load_queries(const std::string& path);
void save_queries(const std::string& path, const std::map<std::string, Query>& queries);

// Loads responses.jsonl and validates against the query manifest. Rejects
// duplicate (model, example, setting) keys and dangling example_ids, naming
// the offending line.
ResponseSet load_response_set(const std::string& responses_path,
                              std::map<std::string, Query> queries);

std::string serialize_response_record(const ResponseRecord& r);
void save_response_set(const std::string& path, const ResponseSet& rs);
void append_response_record(const std::string& path, const ResponseRecord& r);

ValidationReport validate_response_set(const ResponseSet& rs);

// Deterministic query-level split: example_ids are sorted, Fisher-Yates
// shuffled with SplitMix64(seed), then partitioned by floor(n * ratio) with
// the remainder going to train. All records of a query co-travel.
SplitAssignment split_dataset(const ResponseSet& rs, const std::array<double, 3>& ratios,
                              uint64_t seed);

void save_split(const std::string& path, const SplitAssignment& split);
SplitAssignment load_split(const std::string& path);

}  // namespace zpd
