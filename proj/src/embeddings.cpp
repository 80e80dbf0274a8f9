#include "zpd/embeddings.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

#include "zpd/error.hpp"

namespace zpd {

using nlohmann::json;

std::optional<std::span<const float>> EmbeddingStore::find(const std::string& example_id) const {
  auto it = row_of_.find(example_id);
  if (it == row_of_.end()) return std::nullopt;
  return std::span<const float>(rows_.data() + it->second * dim_, dim_);
}

std::span<const float> EmbeddingStore::get(const std::string& example_id) const {
  auto v = find(example_id);
  if (!v) throw Error("missing embedding for example_id " + example_id);
  return *v;
}

void EmbeddingStore::add(const std::string& example_id, std::span<const float> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) {
    throw Error("embedding dimension mismatch for " + example_id + ": expected " +
                std::to_string(dim_) + ", got " + std::to_string(vec.size()));
  }
  if (row_of_.count(example_id)) throw Error("duplicate embedding for " + example_id);
  row_of_.emplace(example_id, rows_.size() / dim_);
  rows_.insert(rows_.end(), vec.begin(), vec.end());
}

EmbeddingStore EmbeddingStore::load(const std::string& f32_path, const std::string& index_path) {
  std::ifstream in(f32_path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + f32_path);
  uint32_t count = 0, dim = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  if (!in) throw Error(f32_path + ": truncated header");

  EmbeddingStore store(dim);
  store.rows_.resize(static_cast<size_t>(count) * dim);
  in.read(reinterpret_cast<char*>(store.rows_.data()),
          static_cast<std::streamsize>(store.rows_.size() * sizeof(float)));
  if (!in) throw Error(f32_path + ": truncated data (expected " + std::to_string(count) +
                       " rows of dim " + std::to_string(dim) + ")");

  std::ifstream idx(index_path);
  if (!idx) throw Error("cannot open file: " + index_path);
  json j;
  try {
    idx >> j;
  } catch (const json::exception& e) {
    throw Error(index_path + ": parse error: " + std::string(e.what()));
  }
  for (const auto& [id, row] : j.items()) {
    size_t r = row.get<size_t>();
    if (r >= count) throw Error(index_path + ": row " + std::to_string(r) + " out of range");
    store.row_of_.emplace(id, r);
  }
  return store;
}

void EmbeddingStore::save(const std::string& f32_path, const std::string& index_path) const {
  std::ofstream out(f32_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + f32_path);
  const uint32_t count = static_cast<uint32_t>(size());
  const uint32_t dim = static_cast<uint32_t>(dim_);
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  out.write(reinterpret_cast<const char*>(rows_.data()),
            static_cast<std::streamsize>(rows_.size() * sizeof(float)));
  if (!out) throw Error("write failed: " + f32_path);

  json j = json::object();
  for (const auto& [id, row] : row_of_) j[id] = row;
  std::ofstream idx(index_path, std::ios::trunc);
  if (!idx) throw Error("cannot write file: " + index_path);
  idx << j.dump(2) << "\n";
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace zpd
