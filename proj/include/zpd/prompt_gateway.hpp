#pragma once
// Prompt assembly, answer scoring, and the inference gateway. Prompts are
// template-rendered demo segments concatenated ahead of the open-ended query
// segment; the gateway talks to a chat/completions-compatible endpoint with a
// content-addressed replay cache so every run is reproducible offline.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zpd/core_data.hpp"

namespace zpd {

struct PromptTemplate {
  Task task = Task::Mathqa;
  std::string body;         // contains {placeholders}; one of them is the answer slot
  std::string answer_slot;  // placeholder name filled for demos, left open for the query
};

// Templates with minimal instruction; inputs bind to the named placeholders.
PromptTemplate default_template(Task task);

struct DecodeConfig {
  int max_new_tokens = 256;
  double temperature = 0.0;  // greedy by default
  std::vector<std::string> stop_sequences;
};

enum class CompletionSource { Live, Replay };

struct CompletionResult {
  std::string text;
  long token_count_prompt = 0;
  long token_count_output = 0;
  CompletionSource source = CompletionSource::Live;
};

// A demo is a query plus the answer to render into the template.
using Demo = std::pair<Query, std::string>;

// Renders a fully-answered demo segment.
std::string render_demo(const Query& query, const std::string& answer,
                        const PromptTemplate& tmpl);

// Renders the open query segment (cut at the answer slot, trailing spaces
// stripped so the prompt ends at the answer cue).
std::string render_query_open(const Query& query, const PromptTemplate& tmpl);

// T(c1) + blank line + ... + T(ck) + blank line + T(x) with the answer slot
// of x left open. Demos keep the given order; no demo may equal the query.
std::string render_prompt(const Query& query, const std::vector<Demo>& demos,
                          const PromptTemplate& tmpl);

// The text that completes an open prompt into the fully-answered rendering,
// i.e. the continuation scored by loglikelihood.
std::string gold_continuation(const Query& query, const PromptTemplate& tmpl);

// Binary scoring: mathqa extracts the final numeric answer ("####" marker
// preferred, else last number token) and compares normalized strings; stance
// takes the first of {favor, against, neutral} in the lowercased output.
// correct = score > tau with tau = 0.5.
struct AnswerScore {
  double score = 0.0;
  int correct = 0;
};
AnswerScore score_answer(Task task, const std::string& raw_output, const std::string& gold);

// Strips commas, sign noise, and trailing fraction zeros from a numeric string.
std::string normalize_number(const std::string& s);

// Maximal non-whitespace runs; endpoint-reported counts override this default.
long count_tokens(const std::string& text);

enum class GatewayMode { Live, Replay };

struct GatewayConfig {
  GatewayMode mode = GatewayMode::Replay;
  std::string base_url;            // e.g. http://localhost:8201
  std::string model;               // model id sent to the endpoint
  std::string api_key_env = "ZPD_API_KEY";
  int timeout_s = 30;
  int retries = 2;                 // additional attempts after the first
  int max_in_flight = 4;
  bool loglik_mean = false;        // false: sum of token log-probs (default)
  std::string cache_path;          // append-only replay cache (jsonl)
};

// Abstract continuation scorer so selection logic can run against mocks.
class LoglikScorer {
public:
  virtual ~LoglikScorer() = default;
  virtual double loglikelihood(const std::string& prompt, const std::string& continuation) = 0;
};

class Gateway : public LoglikScorer {
public:
  explicit Gateway(GatewayConfig cfg);
  ~Gateway() override;

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // One completion; live mode caches, replay mode serves only from cache.
  CompletionResult complete(const std::string& prompt, const DecodeConfig& cfg);

  // Sum (or mean, per config) of token log-probabilities of the continuation
  // given the prompt. Empty continuation is 0 by definition.
  double loglikelihood(const std::string& prompt, const std::string& continuation) override;

  const std::string& model() const;
  const GatewayConfig& config() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace zpd
