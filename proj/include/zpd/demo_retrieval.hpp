#pragma once
// Demonstration candidate retrieval: Okapi BM25 over surface tokens, cosine
// over precomputed embeddings, 2 retrievers x 2 views (rendered (x, y) pair /
// answer only), each contributing top-K plus K seeded samples from its
// bottom-50-percentile ranks.

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "zpd/core_data.hpp"
#include "zpd/embeddings.hpp"

namespace zpd {

struct Bm25Index {
  std::vector<std::string> doc_ids;
  std::vector<std::map<std::string, long>> doc_term_freqs;
  std::vector<long> doc_lengths;
  double avg_doc_length = 0.0;
  std::map<std::string, long> doc_freqs;
  long corpus_size = 0;
  double k1 = 1.2;
  double b = 0.75;

  double idf(const std::string& term) const;
};

// Tokenization: lowercased alphanumeric runs. k1 = 1.2, b = 0.75,
// idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1).
Bm25Index build_bm25_index(const std::vector<std::pair<std::string, std::string>>& corpus);

struct ScoredDoc {
  std::string example_id;
  double score = 0.0;
};

// Descending score, ties broken by ascending example_id. Every query token
// contributes one Okapi term.
std::vector<ScoredDoc> bm25_scores(const Bm25Index& index, const std::string& query_text);

// Cosine similarity against every stored row; zero-norm vectors score 0.
std::vector<ScoredDoc> dense_scores(const EmbeddingStore& store, std::span<const float> query_vec);

enum class RetrievalConfig { Bm25Pair, Bm25Answer, DensePair, DenseAnswer };
std::string retrieval_config_name(RetrievalConfig c);

struct PoolEntry {
  std::string example_id;
  RetrievalConfig config = RetrievalConfig::Bm25Pair;
  long rank = 0;  // 1-based rank within the config's full ranking
  double score = 0.0;
  bool random = false;  // provenance: retrieved (false) or random tail (true)
};

struct CandidatePool {
  std::string query_id;
  std::map<RetrievalConfig, std::vector<ScoredDoc>> retrieved;  // top-K per config
  std::vector<std::string> random_tail;                         // <= 4K ids
  std::vector<PoolEntry> entries;                               // full provenance
  int k = 0;
  std::vector<std::string> warnings;

  // Unique ids in first-occurrence order over entries.
  std::vector<std::string> deduplicated() const;
};

// Texts and embeddings backing the four retrieval views. ids / pair_texts /
// answer_texts are parallel; embedding stores may be null when only sparse
// configs are wanted, but build_candidate_pool requires both.
struct DemoBank {
  std::vector<std::string> ids;
  std::vector<std::string> pair_texts;
  std::vector<std::string> answer_texts;
  const EmbeddingStore* pair_embeddings = nullptr;
  const EmbeddingStore* answer_embeddings = nullptr;
};

// Per-config construction: rank the bank minus the query, keep the top K,
// then sample min(K, floor(m/2)) without replacement from the bottom-half
// ranks with a per-config seed derived from `seed`. Deterministic.
CandidatePool build_candidate_pool(const Query& query, const std::string& query_pair_text,
                                   const DemoBank& bank, int k, uint64_t seed);

}  // namespace zpd
