#include "zpd/demo_retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "zpd/error.hpp"
#include "zpd/rng.hpp"
#include "zpd/util.hpp"

namespace zpd {

double Bm25Index::idf(const std::string& term) const {
  auto it = doc_freqs.find(term);
  const double df = it == doc_freqs.end() ? 0.0 : static_cast<double>(it->second);
  const double n = static_cast<double>(corpus_size);
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

Bm25Index build_bm25_index(const std::vector<std::pair<std::string, std::string>>& corpus) {
  if (corpus.empty()) throw Error("bm25: empty corpus");
  Bm25Index index;
  long total_length = 0;
  for (const auto& [id, text] : corpus) {
    index.doc_ids.push_back(id);
    const auto tokens = alnum_tokens(text);
    std::map<std::string, long> freqs;
    for (const auto& tok : tokens) freqs[tok] += 1;
    index.doc_lengths.push_back(static_cast<long>(tokens.size()));
    total_length += index.doc_lengths.back();
    for (const auto& [term, tf] : freqs) index.doc_freqs[term] += 1;
    index.doc_term_freqs.push_back(std::move(freqs));
  }
  index.corpus_size = static_cast<long>(corpus.size());
  index.avg_doc_length = static_cast<double>(total_length) / static_cast<double>(index.corpus_size);
  return index;
}

namespace {

void sort_ranked(std::vector<ScoredDoc>& docs) {
  std::sort(docs.begin(), docs.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.example_id < b.example_id;
  });
}

}  // namespace

std::vector<ScoredDoc> bm25_scores(const Bm25Index& index, const std::string& query_text) {
  const auto query_tokens = alnum_tokens(query_text);
  std::vector<ScoredDoc> out;
  out.reserve(index.doc_ids.size());
  const double avgdl = index.avg_doc_length == 0.0 ? 1.0 : index.avg_doc_length;
  for (size_t d = 0; d < index.doc_ids.size(); ++d) {
    double score = 0.0;
    const auto& freqs = index.doc_term_freqs[d];
    const double len_norm =
        index.k1 * (1.0 - index.b + index.b * static_cast<double>(index.doc_lengths[d]) / avgdl);
    for (const auto& term : query_tokens) {
      auto it = freqs.find(term);
      if (it == freqs.end()) continue;
      const double tf = static_cast<double>(it->second);
      score += index.idf(term) * tf * (index.k1 + 1.0) / (tf + len_norm);
    }
    out.push_back({index.doc_ids[d], score});
  }
  sort_ranked(out);
  return out;
}

std::vector<ScoredDoc> dense_scores(const EmbeddingStore& store,
                                    std::span<const float> query_vec) {
  std::vector<ScoredDoc> out;
  out.reserve(store.index().size());
  for (const auto& [id, row] : store.index()) {
    out.push_back({id, cosine_similarity(query_vec, store.get(id))});
  }
  sort_ranked(out);
  return out;
}

std::string retrieval_config_name(RetrievalConfig c) {
  switch (c) {
    case RetrievalConfig::Bm25Pair: return "bm25-pair";
    case RetrievalConfig::Bm25Answer: return "bm25-answer";
    case RetrievalConfig::DensePair: return "dense-pair";
    default: return "dense-answer";
  }
}

std::vector<std::string> CandidatePool::deduplicated() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (seen.insert(e.example_id).second) out.push_back(e.example_id);
  }
  return out;
}

CandidatePool build_candidate_pool(const Query& query, const std::string& query_pair_text,
                                   const DemoBank& bank, int k, uint64_t seed) {
  if (k < 1) throw Error("candidate pool: K must be >= 1");
  if (bank.ids.size() != bank.pair_texts.size() || bank.ids.size() != bank.answer_texts.size()) {
    throw Error("candidate pool: bank columns are not parallel");
  }
  if (bank.pair_embeddings == nullptr || bank.answer_embeddings == nullptr) {
    throw Error("candidate pool: dense configs need pair and answer embedding stores");
  }

  CandidatePool pool;
  pool.query_id = query.example_id;
  pool.k = k;

  // Bank minus the target query; each config ranks the same candidate set.
  std::vector<size_t> candidates;
  for (size_t i = 0; i < bank.ids.size(); ++i) {
    if (bank.ids[i] != query.example_id) candidates.push_back(i);
  }
  if (candidates.empty()) throw Error("candidate pool: bank holds no candidates for " + query.example_id);
  if (candidates.size() < static_cast<size_t>(k)) {
    pool.warnings.push_back("bank smaller than K=" + std::to_string(k) + " for query " +
                            query.example_id + "; pool truncated");
  }

  std::vector<std::pair<std::string, std::string>> bm25_pair_corpus, bm25_answer_corpus;
  for (size_t i : candidates) {
    bm25_pair_corpus.emplace_back(bank.ids[i], bank.pair_texts[i]);
    bm25_answer_corpus.emplace_back(bank.ids[i], bank.answer_texts[i]);
  }

  const auto dense_candidate_ranking = [&](const EmbeddingStore& store) {
    auto query_vec = store.find(query.example_id);
    if (!query_vec) throw Error("candidate pool: missing embedding for query " + query.example_id);
    std::vector<ScoredDoc> ranking;
    ranking.reserve(candidates.size());
    for (size_t i : candidates) {
      auto vec = store.find(bank.ids[i]);
      if (!vec) throw Error("candidate pool: missing embedding for candidate " + bank.ids[i]);
      ranking.push_back({bank.ids[i], cosine_similarity(*query_vec, *vec)});
    }
    sort_ranked(ranking);
    return ranking;
  };

  const RetrievalConfig configs[] = {RetrievalConfig::Bm25Pair, RetrievalConfig::Bm25Answer,
                                     RetrievalConfig::DensePair, RetrievalConfig::DenseAnswer};
  for (size_t c = 0; c < 4; ++c) {
    std::vector<ScoredDoc> ranking;
    switch (configs[c]) {
      case RetrievalConfig::Bm25Pair:
        ranking = bm25_scores(build_bm25_index(bm25_pair_corpus), query_pair_text);
        break;
      case RetrievalConfig::Bm25Answer:
        ranking = bm25_scores(build_bm25_index(bm25_answer_corpus), query.gold_answer);
        break;
      case RetrievalConfig::DensePair:
        ranking = dense_candidate_ranking(*bank.pair_embeddings);
        break;
      case RetrievalConfig::DenseAnswer:
        ranking = dense_candidate_ranking(*bank.answer_embeddings);
        break;
    }

    const size_t m = ranking.size();
    const size_t top = std::min(static_cast<size_t>(k), m);
    auto& kept = pool.retrieved[configs[c]];
    for (size_t r = 0; r < top; ++r) {
      kept.push_back(ranking[r]);
      pool.entries.push_back({ranking[r].example_id, configs[c], static_cast<long>(r + 1),
                              ranking[r].score, false});
    }

    // Bottom 50 percentile: the floor(m/2) worst-ranked candidates.
    const size_t bottom = m / 2;
    const size_t take = std::min(static_cast<size_t>(k), bottom);
    if (take > 0) {
      std::vector<size_t> bottom_ranks(bottom);
      for (size_t i = 0; i < bottom; ++i) bottom_ranks[i] = m - bottom + i;
      SplitMix64 rng(derive_seed(seed, c));
      rng.shuffle(bottom_ranks);
      std::vector<size_t> sampled(bottom_ranks.begin(), bottom_ranks.begin() + take);
      std::sort(sampled.begin(), sampled.end());
      for (size_t r : sampled) {
        pool.entries.push_back({ranking[r].example_id, configs[c], static_cast<long>(r + 1),
                                ranking[r].score, true});
        pool.random_tail.push_back(ranking[r].example_id);
      }
    }
  }
  return pool;
}

}  // namespace zpd
