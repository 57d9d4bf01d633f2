#pragma once

// Vector storage, distance kernels and the exact top-k baseline.
//
// Every search in the library minimizes a distance; "similarity" is always the
// negated distance. Result lists are sorted ascending by score with ties broken
// by ascending item id.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "simsearch/error.hpp"

namespace simsearch {

using ItemId = std::uint64_t;
using Embedding = std::vector<float>;
using EmbeddingView = std::span<const float>;

// Scalar metadata value. Integers and reals compare numerically in range filters.
using MetaValue = std::variant<bool, std::int64_t, double, std::string>;
using Metadata = std::map<std::string, MetaValue, std::less<>>;

std::optional<double> numeric_value(const MetaValue& v);
bool meta_equals(const MetaValue& a, const MetaValue& b);

enum class Metric {
  kEuclidean,
  kCosine,             // 1 - cos(a, b)
  kNegInnerProduct,    // -<a, b>
};

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);

// Distance with 64-bit accumulation. Throws DimensionMismatch.
double distance(EmbeddingView a, EmbeddingView b, Metric metric);
double distance(std::span<const double> a, std::span<const double> b, Metric metric);

struct RankedHit {
  ItemId id = 0;
  double score = 0.0;

  friend bool operator==(const RankedHit&, const RankedHit&) = default;
};

// Canonical result ordering: ascending score, then ascending id.
inline bool hit_before(const RankedHit& a, const RankedHit& b) {
  if (a.score != b.score) return a.score < b.score;
  return a.id < b.id;
}

// Keeps the `k` best of `hits` (by hit_before) and returns them sorted.
std::vector<RankedHit> select_topk(std::vector<RankedHit> hits, std::size_t k);

std::vector<ItemId> ids_of(std::span<const RankedHit> hits);

struct StoredItem {
  ItemId id = 0;
  Embedding embedding;
  std::optional<std::string> class_label;
  Metadata metadata;
};

// Row-major in-memory corpus of fixed-dimension embeddings.
//
// Rows keep ingest order; search results never depend on it because ties are
// broken by id. A store value is treated as an immutable snapshot once
// published through VersionedStore.
class VectorStore {
 public:
  explicit VectorStore(std::size_t dim, Metric metric = Metric::kEuclidean);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  Metric metric() const noexcept { return metric_; }
  std::uint64_t version() const noexcept { return version_; }
  void set_version(std::uint64_t v) noexcept { version_ = v; }

  // Appends with the next free id (one past the largest id seen so far).
  ItemId add(EmbeddingView embedding, std::optional<std::string> class_label = std::nullopt,
             Metadata metadata = {});
  // Appends with an explicit id. Throws on duplicate id, wrong dim or non-finite values.
  void insert(StoredItem item);

  ItemId id_at(std::size_t row) const { return ids_[row]; }
  EmbeddingView embedding_at(std::size_t row) const {
    return {data_.data() + row * dim_, dim_};
  }
  const std::optional<std::string>& label_at(std::size_t row) const { return labels_[row]; }
  const Metadata& metadata_at(std::size_t row) const { return metadata_[row]; }

  std::optional<std::size_t> row_of(ItemId id) const;
  bool contains(ItemId id) const { return row_of(id).has_value(); }
  // Throws InvalidArgument for unknown ids.
  std::size_t require_row(ItemId id) const;
  EmbeddingView embedding(ItemId id) const { return embedding_at(require_row(id)); }
  const std::optional<std::string>& label(ItemId id) const { return labels_[require_row(id)]; }

  // Replaces the vector of an existing item; labels and metadata stay fixed.
  void set_embedding(ItemId id, EmbeddingView embedding);

  StoredItem item_at(std::size_t row) const;
  std::vector<ItemId> ids() const { return ids_; }

  friend bool operator==(const VectorStore& a, const VectorStore& b);

 private:
  void check_vector(EmbeddingView embedding) const;

  std::size_t dim_;
  Metric metric_;
  std::uint64_t version_ = 1;
  ItemId next_id_ = 0;
  std::vector<float> data_;
  std::vector<ItemId> ids_;
  std::vector<std::optional<std::string>> labels_;
  std::vector<Metadata> metadata_;
  std::unordered_map<ItemId, std::size_t> row_by_id_;
};

// Scores every row of `store` against `query`. Hits are in row order.
std::vector<RankedHit> score_all(const VectorStore& store, EmbeddingView query, Metric metric);

// k nearest items under `metric`. Throws on empty store, k == 0 or k > size.
std::vector<RankedHit> exact_topk(const VectorStore& store, EmbeddingView query, std::size_t k,
                                  Metric metric);
inline std::vector<RankedHit> exact_topk(const VectorStore& store, EmbeddingView query,
                                         std::size_t k) {
  return exact_topk(store, query, k, store.metric());
}

// Single-writer / multi-reader holder. Readers get a shared snapshot that is
// never modified afterwards; writers publish a new version.
class VersionedStore {
 public:
  explicit VersionedStore(VectorStore initial);

  std::shared_ptr<const VectorStore> snapshot() const;
  std::uint64_t version() const;
  // Publishes `next` as the following version and returns it.
  std::shared_ptr<const VectorStore> publish(VectorStore next);

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const VectorStore> current_;
};

}  // namespace simsearch
