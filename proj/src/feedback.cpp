#include "simsearch/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace simsearch {

Polarity parse_polarity(std::string_view s) {
  if (s == "positive" || s == "pos" || s == "+") return Polarity::kPositive;
  if (s == "negative" || s == "neg" || s == "-") return Polarity::kNegative;
  throw InvalidArgument("unknown polarity: " + std::string(s));
}

std::string_view to_string(Polarity p) {
  return p == Polarity::kPositive ? "positive" : "negative";
}

Embedding adapt_query(EmbeddingView query, std::span<const Embedding> positives,
                      std::span<const Embedding> negatives, double beta, double gamma) {
  const std::size_t dim = query.size();
  std::vector<double> q(query.begin(), query.end());

  auto add_mean = [&](std::span<const Embedding> vectors, double coeff) {
    if (vectors.empty()) return;
    std::vector<double> mean(dim, 0.0);
    for (const auto& v : vectors) {
      if (v.size() != dim) throw DimensionMismatch(dim, v.size());
      for (std::size_t d = 0; d < dim; ++d) mean[d] += v[d];
    }
    const double inv = 1.0 / static_cast<double>(vectors.size());
    for (std::size_t d = 0; d < dim; ++d) q[d] += coeff * mean[d] * inv;
  };
  add_mean(positives, beta);
  add_mean(negatives, -gamma);
  return Embedding(q.begin(), q.end());
}

bool ranking_satisfied(EmbeddingView query, const VectorStore& store,
                       std::span<const ItemId> positive_ids, std::span<const ItemId> negative_ids,
                       Metric metric) {
  double worst_positive = -std::numeric_limits<double>::infinity();
  for (ItemId id : positive_ids)
    worst_positive = std::max(worst_positive, distance(query, store.embedding(id), metric));
  for (ItemId id : negative_ids) {
    if (!(worst_positive < distance(query, store.embedding(id), metric))) return false;
  }
  return true;
}

ComponentId ComponentBank::add(std::span<const double> component) {
  if (component.size() != dim_) throw DimensionMismatch(dim_, component.size());
  const ComponentId id = size();
  data_.insert(data_.end(), component.begin(), component.end());
  return id;
}

std::span<const double> ComponentBank::get(ComponentId id) const {
  if (id >= size()) throw InvalidArgument("unknown component " + std::to_string(id));
  return {data_.data() + id * dim_, dim_};
}

std::vector<double> materialize_exact(const ComponentBank& bank, const ParameterizedEmbedding& pe,
                                      std::span<const double> weights) {
  if (weights.size() != pe.component_ids.size())
    throw InvalidArgument("weight count does not match component count");
  std::vector<double> x(bank.dim(), 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto c = bank.get(pe.component_ids[i]);
    for (std::size_t d = 0; d < x.size(); ++d) x[d] += weights[i] * c[d];
  }
  return x;
}

Embedding materialize(const ComponentBank& bank, const ParameterizedEmbedding& pe,
                      std::span<const double> weights) {
  auto x = materialize_exact(bank, pe, weights);
  return Embedding(x.begin(), x.end());
}

namespace {

// Orthonormal basis of R^dim from a Gaussian matrix (modified Gram-Schmidt).
std::vector<std::vector<double>> random_orthonormal_basis(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  while (basis.size() < dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    for (const auto& b : basis) {
      double proj = 0.0;
      for (std::size_t d = 0; d < dim; ++d) proj += v[d] * b[d];
      for (std::size_t d = 0; d < dim; ++d) v[d] -= proj * b[d];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;  // numerically dependent draw, try again
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace

ParameterizedStore parameterize_store(const VectorStore& store, std::uint64_t seed, std::size_t m) {
  if (m == 0) throw InvalidArgument("parameterized embeddings need at least one component");
  const std::size_t dim = store.dim();
  std::mt19937_64 rng(seed);
  const auto basis = random_orthonormal_basis(dim, rng);

  // Basis vectors are dealt into m contiguous groups as evenly as possible.
  std::vector<std::size_t> group_start(m + 1);
  for (std::size_t g = 0; g <= m; ++g) group_start[g] = g * dim / m;

  ParameterizedStore ps{ComponentBank(dim), {}};
  std::vector<double> component(dim);
  for (std::size_t row = 0; row < store.size(); ++row) {
    auto x = store.embedding_at(row);
    ParameterizedEmbedding pe;
    for (std::size_t g = 0; g < m; ++g) {
      std::fill(component.begin(), component.end(), 0.0);
      for (std::size_t b = group_start[g]; b < group_start[g + 1]; ++b) {
        double coef = 0.0;
        for (std::size_t d = 0; d < dim; ++d) coef += basis[b][d] * x[d];
        for (std::size_t d = 0; d < dim; ++d) component[d] += coef * basis[b][d];
      }
      pe.component_ids.push_back(ps.bank.add(component));
      pe.weights.push_back(1.0);
    }
    ps.items.emplace(store.id_at(row), std::move(pe));
  }
  return ps;
}

VectorStore materialized_store(const VectorStore& store, const ParameterizedStore& ps) {
  VectorStore out = store;
  for (const auto& [id, pe] : ps.items) {
    if (out.contains(id)) out.set_embedding(id, materialize(ps.bank, pe));
  }
  return out;
}

void PendingUpdates::add(PendingUpdate update) {
  auto it = by_item_.find(update.item_id);
  if (it != by_item_.end() && it->second.created_round > update.created_round) return;
  by_item_[update.item_id] = std::move(update);
}

const PendingUpdate* PendingUpdates::find(ItemId id) const {
  auto it = by_item_.find(id);
  return it == by_item_.end() ? nullptr : &it->second;
}

std::vector<ItemId> PendingUpdates::item_ids() const {
  std::vector<ItemId> ids;
  for (const auto& [id, _] : by_item_) ids.push_back(id);
  return ids;
}

PairwiseHingeObjective::PairwiseHingeObjective(const ParameterizedStore& ps,
                                               std::vector<ItemId> positives,
                                               std::vector<ItemId> negatives, EmbeddingView query,
                                               double margin, Metric metric)
    : ps_(ps), query_(query.begin(), query.end()), margin_(margin), metric_(metric) {
  if (query.size() != ps.bank.dim()) throw DimensionMismatch(ps.bank.dim(), query.size());
  offsets_.push_back(0);
  auto slot_of = [&](ItemId id) {
    auto it = std::find(items_.begin(), items_.end(), id);
    if (it != items_.end()) return static_cast<std::size_t>(it - items_.begin());
    auto pe = ps.items.find(id);
    if (pe == ps.items.end()) throw InvalidArgument("item " + std::to_string(id) + " is not parameterized");
    items_.push_back(id);
    offsets_.push_back(offsets_.back() + pe->second.weights.size());
    return items_.size() - 1;
  };
  for (ItemId id : positives) positive_slots_.push_back(slot_of(id));
  for (ItemId id : negatives) negative_slots_.push_back(slot_of(id));
}

std::vector<double> PairwiseHingeObjective::initial_point() const {
  std::vector<double> x;
  for (ItemId id : items_) {
    const auto& w = ps_.items.at(id).weights;
    x.insert(x.end(), w.begin(), w.end());
  }
  return x;
}

double PairwiseHingeObjective::item_distance(std::size_t slot, std::span<const double> x,
                                             std::vector<double>* grad) const {
  const auto& pe = ps_.items.at(items_[slot]);
  const auto weights = x.subspan(offsets_[slot], offsets_[slot + 1] - offsets_[slot]);
  const auto e = materialize_exact(ps_.bank, pe, weights);
  const std::size_t dim = e.size();

  // d(q, e) and its gradient with respect to e.
  std::vector<double> de(dim, 0.0);
  double dist = 0.0;
  switch (metric_) {
    case Metric::kEuclidean: {
      for (std::size_t d = 0; d < dim; ++d) dist += (e[d] - query_[d]) * (e[d] - query_[d]);
      dist = std::sqrt(dist);
      if (dist > 0.0)
        for (std::size_t d = 0; d < dim; ++d) de[d] = (e[d] - query_[d]) / dist;
      break;
    }
    case Metric::kCosine: {
      double qe = 0.0, qq = 0.0, ee = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        qe += query_[d] * e[d];
        qq += query_[d] * query_[d];
        ee += e[d] * e[d];
      }
      if (qq == 0.0 || ee == 0.0) {
        dist = 1.0;
        break;
      }
      const double nq = std::sqrt(qq), ne = std::sqrt(ee);
      dist = 1.0 - qe / (nq * ne);
      for (std::size_t d = 0; d < dim; ++d)
        de[d] = -(query_[d] / (nq * ne) - qe * e[d] / (nq * ne * ee));
      break;
    }
    case Metric::kNegInnerProduct: {
      for (std::size_t d = 0; d < dim; ++d) {
        dist -= query_[d] * e[d];
        de[d] = -query_[d];
      }
      break;
    }
  }

  if (grad) {
    grad->assign(weights.size(), 0.0);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      auto c = ps_.bank.get(pe.component_ids[i]);
      double g = 0.0;
      for (std::size_t d = 0; d < dim; ++d) g += de[d] * c[d];
      (*grad)[i] = g;
    }
  }
  return dist;
}

double PairwiseHingeObjective::loss(std::span<const double> x) const {
  if (x.size() != num_variables()) throw InvalidArgument("wrong variable count");
  std::vector<double> dist(items_.size());
  for (std::size_t s = 0; s < items_.size(); ++s) dist[s] = item_distance(s, x, nullptr);
  double total = 0.0;
  for (std::size_t p : positive_slots_)
    for (std::size_t n : negative_slots_) total += std::max(0.0, margin_ + dist[p] - dist[n]);
  return total;
}

std::vector<double> PairwiseHingeObjective::gradient(std::span<const double> x) const {
  if (x.size() != num_variables()) throw InvalidArgument("wrong variable count");
  std::vector<double> dist(items_.size());
  std::vector<std::vector<double>> dgrad(items_.size());
  for (std::size_t s = 0; s < items_.size(); ++s) dist[s] = item_distance(s, x, &dgrad[s]);

  // Multiplicity of each item's distance in the active hinge terms.
  std::vector<double> coeff(items_.size(), 0.0);
  for (std::size_t p : positive_slots_) {
    for (std::size_t n : negative_slots_) {
      if (margin_ + dist[p] - dist[n] > 0.0) {
        coeff[p] += 1.0;
        coeff[n] -= 1.0;
      }
    }
  }
  std::vector<double> g(num_variables(), 0.0);
  for (std::size_t s = 0; s < items_.size(); ++s) {
    for (std::size_t i = 0; i < dgrad[s].size(); ++i) g[offsets_[s] + i] += coeff[s] * dgrad[s][i];
  }
  return g;
}

WeightAdaptation adapt_weights(const ParameterizedStore& ps, std::span<const FeedbackLabel> labels,
                               EmbeddingView query, const WeightFeedbackParams& params) {
  if (params.eta < 0.0 || !std::isfinite(params.eta)) throw InvalidArgument("eta must be >= 0");

  WeightAdaptation result;
  std::vector<ItemId> positives, negatives;
  std::set<ItemId> seen;
  for (const auto& label : labels) {
    if (!seen.insert(label.item_id).second) {
      result.errors.emplace_back(label.item_id, "labelled more than once in a round");
      continue;
    }
    if (!ps.items.contains(label.item_id)) {
      result.errors.emplace_back(label.item_id, "item is not parameterized");
      continue;
    }
    (label.polarity == Polarity::kPositive ? positives : negatives).push_back(label.item_id);
  }

  PairwiseHingeObjective objective(ps, positives, negatives, query, params.margin, params.metric);
  std::vector<double> x = objective.initial_point();
  double current = objective.loss(x);
  result.initial_loss = current;

  for (std::size_t step = 0; step < params.steps && current > 0.0 && params.eta > 0.0; ++step) {
    const auto g = objective.gradient(x);
    double eta = params.eta;
    bool moved = false;
    for (int attempt = 0; attempt < 30; ++attempt, eta *= 0.5) {
      std::vector<double> trial(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] - eta * g[i];
      const double l = objective.loss(trial);
      if (l < current) {
        x = std::move(trial);
        current = l;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  result.final_loss = current;

  const auto& items = objective.variables_for();
  std::size_t offset = 0;
  for (ItemId id : items) {
    const std::size_t m = ps.items.at(id).weights.size();
    result.updates.push_back(PendingUpdate{
        id, std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(offset),
                                x.begin() + static_cast<std::ptrdiff_t>(offset + m)),
        params.round});
    offset += m;
  }
  return result;
}

namespace {

void apply_update(VectorStore& store, ParameterizedStore& ps, const PendingUpdate& update) {
  auto& pe = ps.items.at(update.item_id);
  pe.weights = update.new_weights;
  store.set_embedding(update.item_id, materialize(ps.bank, pe));
}

}  // namespace

std::vector<ItemId> materialize_if_affecting(VectorStore& store, ParameterizedStore& ps,
                                             PendingUpdates& pending, EmbeddingView query,
                                             std::size_t k, Metric metric) {
  std::vector<ItemId> applied;
  while (!pending.empty()) {
    const auto top = exact_topk(store, query, k, metric);
    const double radius = top.back().score;

    std::vector<ItemId> now;
    for (const auto& [id, update] : pending) {
      const auto pe = ps.items.find(id);
      if (pe == ps.items.end() || !store.contains(id)) continue;
      const double old_d = distance(query, store.embedding(id), metric);
      const Embedding next = materialize(ps.bank, pe->second, update.new_weights);
      const double new_d = distance(query, next, metric);
      if (old_d <= radius || new_d <= radius) now.push_back(id);
    }
    if (now.empty()) break;
    for (ItemId id : now) {
      apply_update(store, ps, *pending.find(id));
      pending.erase(id);
      applied.push_back(id);
    }
  }
  std::sort(applied.begin(), applied.end());
  return applied;
}

std::vector<ItemId> materialize_all(VectorStore& store, ParameterizedStore& ps,
                                    PendingUpdates& pending) {
  std::vector<ItemId> applied;
  for (ItemId id : pending.item_ids()) {
    if (!ps.items.contains(id) || !store.contains(id)) continue;
    apply_update(store, ps, *pending.find(id));
    pending.erase(id);
    applied.push_back(id);
  }
  return applied;
}

}  // namespace simsearch
