#include "zpd/selective_icl.hpp"

#include <algorithm>
#include <cmath>

#include "zpd/error.hpp"

namespace zpd {

namespace {
constexpr double kProbClip = 1e-7;
}

std::vector<QueryProbs> predict_probs(
    const IrtParams& params, int model_idx,
    const std::vector<std::pair<std::string, std::vector<double>>>& items) {
  if (!params.has_icl()) throw Error("predict_probs needs mirt_icl parameters");
  std::vector<QueryProbs> out;
  out.reserve(items.size());
  for (const auto& [id, emb] : items) {
    QueryProbs p;
    p.example_id = id;
    p.p_dp = forward(params, model_idx, -1, emb, 0);
    p.p_icl = forward(params, model_idx, -1, emb, 1);
    p.p_dp = std::min(1.0 - kProbClip, std::max(kProbClip, p.p_dp));
    p.p_icl = std::min(1.0 - kProbClip, std::max(kProbClip, p.p_icl));
    out.push_back(std::move(p));
  }
  return out;
}

PromptMode decide_prompt_mode(const QueryProbs& p, double tau1, double tau2) {
  return (p.p_dp < tau1 && p.p_icl > tau2) ? PromptMode::ICL : PromptMode::DP;
}

MergedZone predict_zone(double p_dp, double p_icl) {
  if (p_dp > 0.5) return MergedZone::Z_OK;
  if (p_icl > 0.5) return MergedZone::Z_ZPD;
  return MergedZone::Z_FAIL;
}

PolicyPoint evaluate_policy(const PolicyRecords& records, const std::vector<QueryProbs>& probs,
                            double tau1, double tau2) {
  PolicyPoint point;
  point.tau1 = tau1;
  point.tau2 = tau2;
  long correct = 0;
  for (const auto& p : probs) {
    const PromptMode mode = decide_prompt_mode(p, tau1, tau2);
    const auto& side = mode == PromptMode::ICL ? records.icl : records.dp;
    auto it = side.find(p.example_id);
    if (it == side.end()) {
      throw Error("policy evaluation: no recorded " +
                  std::string(mode == PromptMode::ICL ? "ICL" : "DP") + " outcome for query " +
                  p.example_id);
    }
    correct += it->second.label;
    point.total_tokens += it->second.prompt_tokens;
    if (mode == PromptMode::ICL) point.routed_icl.insert(p.example_id);
  }
  if (probs.empty()) throw Error("policy evaluation: no queries");
  point.accuracy = static_cast<double>(correct) / static_cast<double>(probs.size());
  return point;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  grid.reserve(99);
  for (int i = 1; i <= 99; ++i) grid.push_back(static_cast<double>(i) / 100.0);
  return grid;
}

std::vector<PolicyPoint> grid_search(const PolicyRecords& records,
                                     const std::vector<QueryProbs>& probs,
                                     const std::vector<double>& grid) {
  std::vector<PolicyPoint> points;
  points.reserve(grid.size() * grid.size());
  for (double tau1 : grid) {
    for (double tau2 : grid) {
      points.push_back(evaluate_policy(records, probs, tau1, tau2));
    }
  }
  return points;
}

std::vector<PolicyPoint> pareto_frontier(const std::vector<PolicyPoint>& points) {
  if (points.empty()) throw Error("pareto frontier: no points");

  // Collapse duplicate (accuracy, tokens) to the lexicographically smallest
  // (tau1, tau2).
  std::map<std::pair<double, long>, const PolicyPoint*> unique;
  for (const auto& p : points) {
    auto key = std::make_pair(p.accuracy, p.total_tokens);
    auto it = unique.find(key);
    if (it == unique.end() || std::make_pair(p.tau1, p.tau2) <
                                  std::make_pair(it->second->tau1, it->second->tau2)) {
      unique[key] = &p;
    }
  }

  // Skyline sweep: ascending tokens, descending accuracy within a token tie;
  // a point survives iff its accuracy strictly beats everything cheaper.
  std::vector<const PolicyPoint*> ordered;
  ordered.reserve(unique.size());
  for (const auto& [key, p] : unique) ordered.push_back(p);
  std::sort(ordered.begin(), ordered.end(), [](const PolicyPoint* a, const PolicyPoint* b) {
    if (a->total_tokens != b->total_tokens) return a->total_tokens < b->total_tokens;
    return a->accuracy > b->accuracy;
  });

  std::vector<PolicyPoint> frontier;
  double best_accuracy = -1.0;
  for (const PolicyPoint* p : ordered) {
    if (p->accuracy > best_accuracy) {
      frontier.push_back(*p);
      best_accuracy = p->accuracy;
    }
  }
  return frontier;
}

std::optional<PolicyPoint> pick_policy(const std::vector<PolicyPoint>& frontier,
                                       long token_budget) {
  std::optional<PolicyPoint> best;
  for (const auto& p : frontier) {
    if (p.total_tokens > token_budget) continue;
    if (!best || p.accuracy > best->accuracy) best = p;
  }
  return best;
}

std::vector<RoutedResult> route_live(const std::vector<Query>& queries,
                                     const std::vector<QueryProbs>& probs, double tau1,
                                     double tau2, Gateway& gateway, const DecodeConfig& decode,
                                     const PromptTemplate& tmpl, const DemoProvider& demos) {
  std::map<std::string, const QueryProbs*> by_id;
  for (const auto& p : probs) by_id[p.example_id] = &p;

  std::vector<RoutedResult> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    auto it = by_id.find(q.example_id);
    if (it == by_id.end()) throw Error("routing: no predicted probs for query " + q.example_id);
    const PromptMode mode = decide_prompt_mode(*it->second, tau1, tau2);
    const std::vector<Demo> demo_list =
        mode == PromptMode::ICL ? demos(q) : std::vector<Demo>{};
    const std::string prompt = render_prompt(q, demo_list, tmpl);
    const CompletionResult result = gateway.complete(prompt, decode);
    const AnswerScore scored = score_answer(q.task, result.text, q.gold_answer);
    RoutedResult r;
    r.example_id = q.example_id;
    r.mode = mode;
    r.label = scored.correct;
    r.prompt_tokens = result.token_count_prompt > 0 ? result.token_count_prompt
                                                    : count_tokens(prompt);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace zpd
