#pragma once

// Cluster-respecting search by iterative query-set expansion.
//
// Each round scores every remaining item c by
//
//     d(query, c) + sum_{j=1..|accepted|} lambda^j * d(dp_j, c)
//
// where dp_j is the j-th accepted neighbour, accepts the `batch_size` items
// with the smallest score, and appends them to the query set. With lambda = 0
// the procedure is plain top-k.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "simsearch/core.hpp"

namespace simsearch {

struct LocalSearchParams {
  std::size_t k = 10;
  double lambda = 0.9;
  std::size_t batch_size = 1;
  Metric metric = Metric::kEuclidean;

  // Throws InvalidArgument unless 0 <= lambda <= 1 and 1 <= batch_size <= k.
  void validate() const;
};

struct QuerySet {
  Embedding original;
  std::vector<std::pair<ItemId, Embedding>> accepted;  // acceptance order, position j = index + 1

  void accept(ItemId id, EmbeddingView embedding);
  bool contains(ItemId id) const;
};

double decay_weight(double lambda, std::size_t position);

double objective_score(const QuerySet& qs, EmbeddingView candidate, double lambda, Metric metric);

// Returns true when accepting `accepted` must remove `candidate` from further rounds.
using ExclusionRule = std::function<bool(ItemId accepted, ItemId candidate)>;

// Hits come back in acceptance order; score is the objective value at the round
// the item was accepted. Throws InvalidArgument when k > store size.
std::vector<RankedHit> iterative_topk(const VectorStore& store, EmbeddingView query,
                                      const LocalSearchParams& params);

// Variant used by windowed retrieval: items conflicting with an accepted item
// are dropped from the candidate pool. May return fewer than k hits when the
// pool runs dry.
std::vector<RankedHit> iterative_topk(const VectorStore& store, EmbeddingView query,
                                      const LocalSearchParams& params,
                                      const ExclusionRule& excluded);

// Abstract item collection for iterative_topk over objects that are not plain
// store rows (e.g. windows of an event series). Rows are 0..size-1.
struct DistanceSource {
  std::size_t size = 0;
  std::function<ItemId(std::size_t row)> id;
  std::function<double(std::size_t row)> to_query;
  std::function<double(std::size_t a, std::size_t b)> between;
};

std::vector<RankedHit> iterative_topk(const DistanceSource& source, const LocalSearchParams& params,
                                      const ExclusionRule& excluded = {});

// Fraction of hits whose class label equals `query_class`. Empty hits -> 0.
double cluster_purity(std::span<const RankedHit> hits, const VectorStore& store,
                      const std::string& query_class);

}  // namespace simsearch
