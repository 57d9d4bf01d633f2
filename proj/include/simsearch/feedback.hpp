#pragma once

// Relevance feedback: adapt the query vector, or adapt per-item mixing weights
// of parameterized embeddings and materialize those updates lazily.

#include <map>
#include <string>
#include <vector>

#include "simsearch/core.hpp"

namespace simsearch {

enum class Polarity { kPositive, kNegative };

Polarity parse_polarity(std::string_view s);
std::string_view to_string(Polarity p);

struct FeedbackLabel {
  ItemId item_id = 0;
  Polarity polarity = Polarity::kPositive;
  std::size_t round = 1;
};

inline constexpr double kDefaultBeta = 0.75;
inline constexpr double kDefaultGamma = 0.25;

// Rocchio update: q + beta * mean(positives) - gamma * mean(negatives).
// An empty side contributes nothing.
Embedding adapt_query(EmbeddingView query, std::span<const Embedding> positives,
                      std::span<const Embedding> negatives, double beta = kDefaultBeta,
                      double gamma = kDefaultGamma);

// True iff every positive is strictly closer to `query` than every negative.
bool ranking_satisfied(EmbeddingView query, const VectorStore& store,
                       std::span<const ItemId> positive_ids, std::span<const ItemId> negative_ids,
                       Metric metric);

using ComponentId = std::size_t;

// Shared pool of component vectors referenced by parameterized embeddings.
class ComponentBank {
 public:
  explicit ComponentBank(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return data_.size() / dim_; }
  ComponentId add(std::span<const double> component);
  std::span<const double> get(ComponentId id) const;

 private:
  std::size_t dim_;
  std::vector<double> data_;
};

// x = sum_i weights[i] * bank[component_ids[i]]
struct ParameterizedEmbedding {
  std::vector<ComponentId> component_ids;
  std::vector<double> weights;
};

std::vector<double> materialize_exact(const ComponentBank& bank, const ParameterizedEmbedding& pe,
                                      std::span<const double> weights);
// The stored (f32) form of an item with the given weights.
Embedding materialize(const ComponentBank& bank, const ParameterizedEmbedding& pe,
                      std::span<const double> weights);
inline Embedding materialize(const ComponentBank& bank, const ParameterizedEmbedding& pe) {
  return materialize(bank, pe, pe.weights);
}

struct ParameterizedStore {
  ComponentBank bank;
  std::map<ItemId, ParameterizedEmbedding> items;
};

// Splits every item into `m` components by projecting it onto m mutually
// orthogonal random subspaces (weights start at 1, so the sum reproduces the
// item up to rounding).
ParameterizedStore parameterize_store(const VectorStore& store, std::uint64_t seed,
                                      std::size_t m = 2);

// Copy of `store` whose vectors are the materialized parameterized items.
VectorStore materialized_store(const VectorStore& store, const ParameterizedStore& ps);

struct PendingUpdate {
  ItemId item_id = 0;
  std::vector<double> new_weights;
  std::size_t created_round = 0;
};

// At most one pending update per item; a newer round supersedes an older one.
class PendingUpdates {
 public:
  void add(PendingUpdate update);
  bool empty() const noexcept { return by_item_.empty(); }
  std::size_t size() const noexcept { return by_item_.size(); }
  const PendingUpdate* find(ItemId id) const;
  void erase(ItemId id) { by_item_.erase(id); }
  std::vector<ItemId> item_ids() const;

  auto begin() const { return by_item_.begin(); }
  auto end() const { return by_item_.end(); }

 private:
  std::map<ItemId, PendingUpdate> by_item_;
};

inline constexpr double kDefaultRankMargin = 0.1;

// Pairwise hinge loss over labelled parameterized items,
//   sum_{p in pos, n in neg} max(0, margin + d(q, x_p) - d(q, x_n)),
// as a function of the concatenated weights of the labelled items.
class PairwiseHingeObjective {
 public:
  PairwiseHingeObjective(const ParameterizedStore& ps, std::vector<ItemId> positives,
                         std::vector<ItemId> negatives, EmbeddingView query,
                         double margin = kDefaultRankMargin, Metric metric = Metric::kEuclidean);

  // Variable layout: for each item of variables_for() in order, its weights.
  const std::vector<ItemId>& variables_for() const noexcept { return items_; }
  std::size_t num_variables() const noexcept { return offsets_.back(); }
  std::vector<double> initial_point() const;

  double loss(std::span<const double> x) const;
  std::vector<double> gradient(std::span<const double> x) const;

 private:
  double item_distance(std::size_t slot, std::span<const double> x,
                       std::vector<double>* grad_of_weights) const;

  const ParameterizedStore& ps_;
  std::vector<ItemId> items_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> positive_slots_, negative_slots_;
  std::vector<double> query_;
  double margin_;
  Metric metric_;
};

struct WeightFeedbackParams {
  double eta = 0.1;
  std::size_t steps = 20;
  double margin = kDefaultRankMargin;
  Metric metric = Metric::kEuclidean;
  std::size_t round = 1;
};

struct WeightAdaptation {
  std::vector<PendingUpdate> updates;                       // one per usable labelled item
  std::vector<std::pair<ItemId, std::string>> errors;      // labelled items that were skipped
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Gradient descent (with step halving on non-improving steps) on the pairwise
// hinge loss. Only labelled items receive updates; the loss never increases.
WeightAdaptation adapt_weights(const ParameterizedStore& ps, std::span<const FeedbackLabel> labels,
                               EmbeddingView query, const WeightFeedbackParams& params);

// Lazy materialization. An update is applied when the item's current or new
// vector lies within the current k-th nearest distance; this repeats until no
// further update qualifies, at which point top-k over `store` equals top-k
// after applying every pending update. Returns applied ids in ascending order.
std::vector<ItemId> materialize_if_affecting(VectorStore& store, ParameterizedStore& ps,
                                             PendingUpdates& pending, EmbeddingView query,
                                             std::size_t k, Metric metric);

// Eager counterpart: applies everything.
std::vector<ItemId> materialize_all(VectorStore& store, ParameterizedStore& ps,
                                    PendingUpdates& pending);

}  // namespace simsearch
