#pragma once
// Routing policy over fitted MIRT_ICL predictions: apply ICL to a query only
// when the predicted direct-prompting probability is low and the predicted
// ICL probability is high, sweep both thresholds over a grid, account
// accuracy against recorded token cost, and keep the Pareto frontier.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "zpd/core_data.hpp"
#include "zpd/irt_engine.hpp"
#include "zpd/prompt_gateway.hpp"
#include "zpd/zone_measurement.hpp"

namespace zpd {

struct QueryProbs {
  std::string example_id;
  double p_dp = 0.5;
  double p_icl = 0.5;
};

// p_dp = forward(g = 0), p_icl = forward(g = 1), clipped into the open
// interval. MIRT_ICL parameters only.
std::vector<QueryProbs> predict_probs(
    const IrtParams& params, int model_idx,
    const std::vector<std::pair<std::string, std::vector<double>>>& items);

// ICL iff p_dp < tau1 and p_icl > tau2.
enum class PromptMode { DP, ICL };
PromptMode decide_prompt_mode(const QueryProbs& p, double tau1, double tau2);

// Predicted merged zone at threshold 0.5 on both setting probabilities.
MergedZone predict_zone(double p_dp, double p_icl);

// Recorded outcome of one query under one mode.
struct RecordedOutcome {
  int label = 0;
  long prompt_tokens = 0;
};

struct PolicyRecords {
  std::map<std::string, RecordedOutcome> dp;
  std::map<std::string, RecordedOutcome> icl;  // outcomes of the ICL strategy under evaluation
};

struct PolicyPoint {
  double tau1 = 0.0;
  double tau2 = 0.0;
  double accuracy = 0.0;
  long total_tokens = 0;
  std::set<std::string> routed_icl;
};

// Takes each query's recorded (label, tokens) under its routed mode; no new
// inference happens here.
PolicyPoint evaluate_policy(const PolicyRecords& records, const std::vector<QueryProbs>& probs,
                            double tau1, double tau2);

// Default grid is {0.01, 0.02, ..., 0.99} for both thresholds.
std::vector<double> default_threshold_grid();
std::vector<PolicyPoint> grid_search(const PolicyRecords& records,
                                     const std::vector<QueryProbs>& probs,
                                     const std::vector<double>& grid);

// Maximize accuracy, minimize tokens. Output ascending by tokens; duplicate
// (accuracy, tokens) pairs collapse to the lexicographically smallest
// (tau1, tau2).
std::vector<PolicyPoint> pareto_frontier(const std::vector<PolicyPoint>& points);

// Frontier point with the highest accuracy whose token total fits the budget.
std::optional<PolicyPoint> pick_policy(const std::vector<PolicyPoint>& frontier,
                                       long token_budget);

// Deployment path: issues only the routed request per query. The demo
// provider supplies the strategy's demonstrations for ICL-routed queries.
using DemoProvider = std::function<std::vector<Demo>(const Query&)>;

struct RoutedResult {
  std::string example_id;
  PromptMode mode = PromptMode::DP;
  int label = 0;
  long prompt_tokens = 0;
};

std::vector<RoutedResult> route_live(const std::vector<Query>& queries,
                                     const std::vector<QueryProbs>& probs, double tau1,
                                     double tau2, Gateway& gateway, const DecodeConfig& decode,
                                     const PromptTemplate& tmpl, const DemoProvider& demos);

}  // namespace zpd
