#pragma once
// Embedding sidecar: `<name>.f32` holds a (count, dim) uint32 little-endian
// header followed by row-major float32 data; a JSON index file maps
// example_id -> row. Embeddings are ingested precomputed, never produced here.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zpd {

class EmbeddingStore {
public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(size_t dim) : dim_(dim) {}

  size_t dim() const { return dim_; }
  size_t size() const { return rows_.size() / (dim_ == 0 ? 1 : dim_); }

  bool contains(const std::string& example_id) const { return row_of_.count(example_id) > 0; }
  std::optional<std::span<const float>> find(const std::string& example_id) const;
  // Throws when the id is absent.
  std::span<const float> get(const std::string& example_id) const;

  void add(const std::string& example_id, std::span<const float> vec);

  const std::map<std::string, size_t>& index() const { return row_of_; }

  static EmbeddingStore load(const std::string& f32_path, const std::string& index_path);
  void save(const std::string& f32_path, const std::string& index_path) const;

private:
  size_t dim_ = 0;
  std::vector<float> rows_;
  std::map<std::string, size_t> row_of_;
};

double cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace zpd
