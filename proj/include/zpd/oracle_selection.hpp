#pragma once
// Greedy oracle demonstration selection: at each step, score every remaining
// candidate by the log-likelihood of the gold answer given the prompt built
// from the demos chosen so far plus that candidate, and keep the argmax.

#include <map>
#include <string>
#include <vector>

#include "zpd/core_data.hpp"
#include "zpd/prompt_gateway.hpp"

namespace zpd {

struct OracleStep {
  int step = 0;  // 1-based
  std::vector<std::pair<std::string, double>> scores;  // every remaining candidate
  std::string chosen;
  double chosen_loglik = 0.0;
};

struct OracleSelection {
  std::string query_id;
  std::vector<std::string> demos;  // selection order, length <= k
  std::vector<OracleStep> step_scores;
  double final_loglik = 0.0;
};

// Candidates come from the deduplicated pool; `corpus` resolves candidate ids
// to queries (with gold answers) for rendering. Ties break toward the lower
// example_id; selection stops early when the pool runs out. Evaluation count
// is k * |pool| - k * (k - 1) / 2 for |pool| >= k.
OracleSelection select_oracle_demos(const Query& query, const std::vector<std::string>& pool_ids,
                                    int k, LoglikScorer& scorer, const PromptTemplate& tmpl,
                                    const std::map<std::string, Query>& corpus);

// Renders the selected k-demo prompt, completes it, scores the output, and
// emits the paired ICL record for the gateway's model.
ResponseRecord materialize_icl_record(const OracleSelection& selection, Gateway& gateway,
                                      const DecodeConfig& decode, const PromptTemplate& tmpl,
                                      const std::map<std::string, Query>& corpus);

}  // namespace zpd
