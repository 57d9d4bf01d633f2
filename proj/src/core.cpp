#include "simsearch/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace simsearch {

const char* to_string(FormatErrorCode code) {
  switch (code) {
    case FormatErrorCode::kIo: return "io error";
    case FormatErrorCode::kBadMagic: return "bad magic";
    case FormatErrorCode::kBadHeader: return "bad header";
    case FormatErrorCode::kTruncated: return "truncated";
    case FormatErrorCode::kCountMismatch: return "count mismatch";
    case FormatErrorCode::kBadPayload: return "bad payload";
    case FormatErrorCode::kBadMetadata: return "bad metadata";
  }
  return "format error";
}

std::optional<double> numeric_value(const MetaValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nullopt;
}

bool meta_equals(const MetaValue& a, const MetaValue& b) {
  auto na = numeric_value(a);
  auto nb = numeric_value(b);
  if (na && nb) return *na == *nb;
  return a == b;
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kEuclidean: return "euclidean";
    case Metric::kCosine: return "cosine";
    case Metric::kNegInnerProduct: return "neg_inner_product";
  }
  return "euclidean";
}

Metric parse_metric(std::string_view name) {
  if (name == "euclidean" || name == "l2") return Metric::kEuclidean;
  if (name == "cosine" || name == "cosine-distance") return Metric::kCosine;
  if (name == "neg_inner_product" || name == "negative-inner-product" || name == "ip")
    return Metric::kNegInnerProduct;
  throw InvalidArgument("unknown metric: " + std::string(name));
}

namespace {

template <typename T>
double distance_impl(std::span<const T> a, std::span<const T> b, Metric metric) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  switch (metric) {
    case Metric::kEuclidean: {
      double sum = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
      }
      return std::sqrt(sum);
    }
    case Metric::kCosine: {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i], y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
      }
      // A zero vector has no direction; treat it as orthogonal to everything.
      if (na == 0.0 || nb == 0.0) return 1.0;
      const double cos = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
      return 1.0 - cos;
    }
    case Metric::kNegInnerProduct: {
      double dot = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i)
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
      return -dot;
    }
  }
  return 0.0;
}

}  // namespace

double distance(EmbeddingView a, EmbeddingView b, Metric metric) {
  return distance_impl<float>(a, b, metric);
}

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  return distance_impl<double>(a, b, metric);
}

std::vector<RankedHit> select_topk(std::vector<RankedHit> hits, std::size_t k) {
  k = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                    hit_before);
  hits.resize(k);
  return hits;
}

std::vector<ItemId> ids_of(std::span<const RankedHit> hits) {
  std::vector<ItemId> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.id);
  return out;
}

VectorStore::VectorStore(std::size_t dim, Metric metric) : dim_(dim), metric_(metric) {
  if (dim == 0) throw InvalidArgument("store dimension must be positive");
}

void VectorStore::check_vector(EmbeddingView embedding) const {
  if (embedding.size() != dim_) throw DimensionMismatch(dim_, embedding.size());
  for (float v : embedding) {
    if (!std::isfinite(v)) throw InvalidArgument("embedding contains non-finite value");
  }
}

ItemId VectorStore::add(EmbeddingView embedding, std::optional<std::string> class_label,
                        Metadata metadata) {
  const ItemId id = next_id_;
  insert(StoredItem{id, Embedding(embedding.begin(), embedding.end()), std::move(class_label),
                    std::move(metadata)});
  return id;
}

void VectorStore::insert(StoredItem item) {
  check_vector(item.embedding);
  if (row_by_id_.contains(item.id))
    throw InvalidArgument("duplicate item id " + std::to_string(item.id));
  row_by_id_.emplace(item.id, ids_.size());
  ids_.push_back(item.id);
  data_.insert(data_.end(), item.embedding.begin(), item.embedding.end());
  labels_.push_back(std::move(item.class_label));
  metadata_.push_back(std::move(item.metadata));
  next_id_ = std::max(next_id_, item.id + 1);
}

std::optional<std::size_t> VectorStore::row_of(ItemId id) const {
  auto it = row_by_id_.find(id);
  if (it == row_by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t VectorStore::require_row(ItemId id) const {
  auto row = row_of(id);
  if (!row) throw InvalidArgument("unknown item id " + std::to_string(id));
  return *row;
}

void VectorStore::set_embedding(ItemId id, EmbeddingView embedding) {
  check_vector(embedding);
  const std::size_t row = require_row(id);
  std::copy(embedding.begin(), embedding.end(), data_.begin() + static_cast<std::ptrdiff_t>(row * dim_));
}

StoredItem VectorStore::item_at(std::size_t row) const {
  auto e = embedding_at(row);
  return StoredItem{ids_[row], Embedding(e.begin(), e.end()), labels_[row], metadata_[row]};
}

bool operator==(const VectorStore& a, const VectorStore& b) {
  // Bit-exact comparison of vectors; version is bookkeeping, not content.
  if (a.dim_ != b.dim_ || a.metric_ != b.metric_ || a.ids_ != b.ids_ ||
      a.labels_ != b.labels_ || a.metadata_ != b.metadata_ || a.data_.size() != b.data_.size())
    return false;
  return std::equal(a.data_.begin(), a.data_.end(), b.data_.begin(),
                    [](float x, float y) { return std::bit_cast<std::uint32_t>(x) ==
                                                  std::bit_cast<std::uint32_t>(y); });
}

std::vector<RankedHit> score_all(const VectorStore& store, EmbeddingView query, Metric metric) {
  if (query.size() != store.dim()) throw DimensionMismatch(store.dim(), query.size());
  std::vector<RankedHit> hits(store.size());
  for (std::size_t row = 0; row < store.size(); ++row)
    hits[row] = RankedHit{store.id_at(row), distance(query, store.embedding_at(row), metric)};
  return hits;
}

std::vector<RankedHit> exact_topk(const VectorStore& store, EmbeddingView query, std::size_t k,
                                  Metric metric) {
  if (store.empty()) throw InvalidArgument("exact_topk: empty store");
  if (k == 0) throw InvalidArgument("exact_topk: k must be at least 1");
  if (k > store.size())
    throw InvalidArgument("exact_topk: k=" + std::to_string(k) + " exceeds store size " +
                          std::to_string(store.size()));
  return select_topk(score_all(store, query, metric), k);
}

VersionedStore::VersionedStore(VectorStore initial)
    : current_(std::make_shared<const VectorStore>(std::move(initial))) {}

std::shared_ptr<const VectorStore> VersionedStore::snapshot() const {
  std::lock_guard lock(mu_);
  return current_;
}

std::uint64_t VersionedStore::version() const {
  std::lock_guard lock(mu_);
  return current_->version();
}

std::shared_ptr<const VectorStore> VersionedStore::publish(VectorStore next) {
  std::lock_guard lock(mu_);
  next.set_version(current_->version() + 1);
  current_ = std::make_shared<const VectorStore>(std::move(next));
  return current_;
}

}  // namespace simsearch
