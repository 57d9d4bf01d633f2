#include "simsearch/local_search.hpp"

#include <algorithm>
#include <cmath>

namespace simsearch {

void LocalSearchParams::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw InvalidArgument("lambda must lie in [0, 1], got " + std::to_string(lambda));
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (batch_size == 0 || batch_size > k)
    throw InvalidArgument("batch_size must lie in [1, k], got " + std::to_string(batch_size));
}

void QuerySet::accept(ItemId id, EmbeddingView embedding) {
  if (contains(id)) throw InvalidArgument("item " + std::to_string(id) + " already accepted");
  accepted.emplace_back(id, Embedding(embedding.begin(), embedding.end()));
}

bool QuerySet::contains(ItemId id) const {
  return std::any_of(accepted.begin(), accepted.end(),
                     [id](const auto& entry) { return entry.first == id; });
}

double decay_weight(double lambda, std::size_t position) {
  return std::pow(lambda, static_cast<double>(position));
}

double objective_score(const QuerySet& qs, EmbeddingView candidate, double lambda, Metric metric) {
  double score = distance(qs.original, candidate, metric);
  for (std::size_t j = 0; j < qs.accepted.size(); ++j)
    score += decay_weight(lambda, j + 1) * distance(qs.accepted[j].second, candidate, metric);
  return score;
}

namespace {

std::vector<RankedHit> run_iterative(const DistanceSource& src, const LocalSearchParams& params,
                                     const ExclusionRule* excluded) {
  params.validate();
  if (src.size == 0) throw InvalidArgument("iterative_topk: empty store");
  if (params.k > src.size)
    throw InvalidArgument("iterative_topk: k=" + std::to_string(params.k) +
                          " exceeds store size " + std::to_string(src.size));

  // running[row] holds the objective of row against the current query set;
  // it is extended in place each time a neighbour is accepted.
  std::vector<RankedHit> running(src.size);
  for (std::size_t row = 0; row < src.size; ++row) running[row] = {src.id(row), src.to_query(row)};
  std::vector<std::size_t> alive(src.size);
  for (std::size_t row = 0; row < alive.size(); ++row) alive[row] = row;

  auto row_before = [&](std::size_t a, std::size_t b) { return hit_before(running[a], running[b]); };

  std::vector<RankedHit> out;
  out.reserve(params.k);
  std::size_t position = 0;
  while (out.size() < params.k && !alive.empty()) {
    const std::size_t want = std::min(params.batch_size, params.k - out.size());

    std::vector<std::size_t> batch;
    if (excluded == nullptr) {
      const std::size_t take = std::min(want, alive.size());
      std::partial_sort(alive.begin(), alive.begin() + static_cast<std::ptrdiff_t>(take),
                        alive.end(), row_before);
      batch.assign(alive.begin(), alive.begin() + static_cast<std::ptrdiff_t>(take));
      alive.erase(alive.begin(), alive.begin() + static_cast<std::ptrdiff_t>(take));
    } else {
      // Pick one at a time so that conflicts inside a batch are honoured.
      while (batch.size() < want && !alive.empty()) {
        auto best = std::min_element(alive.begin(), alive.end(), row_before);
        const std::size_t row = *best;
        alive.erase(best);
        batch.push_back(row);
        const ItemId id = running[row].id;
        std::erase_if(alive, [&](std::size_t c) { return (*excluded)(id, running[c].id); });
      }
    }

    for (std::size_t row : batch) out.push_back(running[row]);
    if (out.size() >= params.k) break;

    // All batch members were scored against the pre-round query set; only now
    // do they join it, in score order.
    for (std::size_t row : batch) {
      ++position;
      const double weight = decay_weight(params.lambda, position);
      if (weight == 0.0) continue;
      for (std::size_t c : alive) running[c].score += weight * src.between(row, c);
    }
  }
  return out;
}

DistanceSource store_source(const VectorStore& store, EmbeddingView query, Metric metric) {
  if (query.size() != store.dim()) throw DimensionMismatch(store.dim(), query.size());
  DistanceSource src;
  src.size = store.size();
  src.id = [&store](std::size_t row) { return store.id_at(row); };
  src.to_query = [&store, query, metric](std::size_t row) {
    return distance(query, store.embedding_at(row), metric);
  };
  src.between = [&store, metric](std::size_t a, std::size_t b) {
    return distance(store.embedding_at(a), store.embedding_at(b), metric);
  };
  return src;
}

}  // namespace

std::vector<RankedHit> iterative_topk(const VectorStore& store, EmbeddingView query,
                                      const LocalSearchParams& params) {
  return run_iterative(store_source(store, query, params.metric), params, nullptr);
}

std::vector<RankedHit> iterative_topk(const VectorStore& store, EmbeddingView query,
                                      const LocalSearchParams& params,
                                      const ExclusionRule& excluded) {
  return run_iterative(store_source(store, query, params.metric), params,
                       excluded ? &excluded : nullptr);
}

std::vector<RankedHit> iterative_topk(const DistanceSource& source, const LocalSearchParams& params,
                                      const ExclusionRule& excluded) {
  return run_iterative(source, params, excluded ? &excluded : nullptr);
}

double cluster_purity(std::span<const RankedHit> hits, const VectorStore& store,
                      const std::string& query_class) {
  if (hits.empty()) return 0.0;
  std::size_t matching = 0;
  for (const auto& hit : hits) {
    const auto& label = store.label(hit.id);
    if (label && *label == query_class) ++matching;
  }
  return static_cast<double>(matching) / static_cast<double>(hits.size());
}

}  // namespace simsearch
