#include "zpd/oracle_selection.hpp"

#include <algorithm>

#include "zpd/error.hpp"

namespace zpd {

namespace {

const Query& resolve(const std::map<std::string, Query>& corpus, const std::string& id) {
  auto it = corpus.find(id);
  if (it == corpus.end()) throw Error("oracle selection: candidate " + id + " not in corpus");
  return it->second;
}

}  // namespace

OracleSelection select_oracle_demos(const Query& query, const std::vector<std::string>& pool_ids,
                                    int k, LoglikScorer& scorer, const PromptTemplate& tmpl,
                                    const std::map<std::string, Query>& corpus) {
  if (pool_ids.empty()) throw Error("oracle selection: empty candidate pool for " + query.example_id);
  if (k < 1) throw Error("oracle selection: k must be >= 1");

  // Sorted remaining set so per-step score lists are in a canonical order and
  // the argmax tie rule (lowest example_id) falls out of the scan direction.
  std::vector<std::string> remaining;
  for (const auto& id : pool_ids) {
    if (id != query.example_id) remaining.push_back(id);
  }
  std::sort(remaining.begin(), remaining.end());
  remaining.erase(std::unique(remaining.begin(), remaining.end()), remaining.end());

  const std::string continuation = gold_continuation(query, tmpl);

  OracleSelection sel;
  sel.query_id = query.example_id;
  std::vector<Demo> chosen;

  for (int step = 1; step <= k && !remaining.empty(); ++step) {
    OracleStep record;
    record.step = step;
    size_t best = 0;
    double best_loglik = 0.0;
    for (size_t i = 0; i < remaining.size(); ++i) {
      const Query& cand = resolve(corpus, remaining[i]);
      std::vector<Demo> demos = chosen;
      demos.emplace_back(cand, cand.gold_answer);
      const std::string prompt = render_prompt(query, demos, tmpl);
      double value;
      try {
        value = scorer.loglikelihood(prompt, continuation);
      } catch (const Error& e) {
        throw Error("oracle selection: scorer failed at step " + std::to_string(step) +
                    " for candidate " + remaining[i] + ": " + e.what());
      }
      record.scores.emplace_back(remaining[i], value);
      if (i == 0 || value > best_loglik) {
        best = i;
        best_loglik = value;
      }
    }
    record.chosen = remaining[best];
    record.chosen_loglik = best_loglik;
    sel.step_scores.push_back(std::move(record));
    sel.demos.push_back(remaining[best]);
    sel.final_loglik = best_loglik;
    const Query& picked = resolve(corpus, remaining[best]);
    chosen.emplace_back(picked, picked.gold_answer);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return sel;
}

ResponseRecord materialize_icl_record(const OracleSelection& selection, Gateway& gateway,
                                      const DecodeConfig& decode, const PromptTemplate& tmpl,
                                      const std::map<std::string, Query>& corpus) {
  const Query& query = resolve(corpus, selection.query_id);
  std::vector<Demo> demos;
  for (const auto& id : selection.demos) {
    const Query& d = resolve(corpus, id);
    demos.emplace_back(d, d.gold_answer);
  }
  const std::string prompt = render_prompt(query, demos, tmpl);
  const CompletionResult result = gateway.complete(prompt, decode);
  const AnswerScore scored = score_answer(query.task, result.text, query.gold_answer);

  ResponseRecord record;
  record.model_id = gateway.model();
  record.example_id = query.example_id;
  record.setting = Setting::ICL;
  record.prompt_text = prompt;
  record.raw_output = result.text;
  record.label = scored.correct;
  record.prompt_token_count =
      result.token_count_prompt > 0 ? result.token_count_prompt : count_tokens(prompt);
  return record;
}

}  // namespace zpd
