#pragma once

// Hyperplane-based retrieval: the query (and any other positives) is separated
// from every corpus vector by a linear max-margin classifier, and the corpus is
// ranked by signed distance to that hyperplane.

#include <optional>
#include <vector>

#include "simsearch/core.hpp"

namespace simsearch {

struct LinearSeparator {
  std::vector<double> w;
  double b = 0.0;

  double decision(EmbeddingView x) const;  // w.x + b
  double norm() const;                     // ||w||
  // (w.x + b) / ||w||; positive on the side of the positives.
  double signed_distance(EmbeddingView x) const;
};

struct SvmParams {
  double reg_c = 1.0;            // inverse regularization strength
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  // Multiplier on each positive's hinge term. Unset: #negatives / #positives.
  std::optional<double> positive_weight;
  bool standardize = false;      // per-dimension z-scoring before training

  void validate() const;
};

// Objective value of the returned separator after each epoch. The solver keeps
// the best candidate seen so far, so the sequence is non-increasing.
struct TrainingReport {
  std::vector<double> epoch_objective;
};

// Trains with every store vector as a negative. Solver: Pegasos-style stochastic
// subgradient descent on the L2-regularized weighted hinge loss with step
// 1/(reg * t), examples drawn in proportion to their weight, per-epoch iterate
// averaging. Deterministic for a fixed seed.
//
// Throws InvalidArgument for an empty store, empty positives or dim mismatch.
LinearSeparator train_separator(const VectorStore& store, std::span<const Embedding> positives,
                                const SvmParams& params, TrainingReport* report = nullptr);

// Same, restricted to the given negatives (e.g. a coreset).
LinearSeparator train_separator(const VectorStore& store, std::span<const ItemId> negative_ids,
                                std::span<const Embedding> positives, const SvmParams& params,
                                TrainingReport* report = nullptr);

// score = -(w.x + b)/||w||, so items on the positives' side come first.
// Throws InvalidArgument for a zero weight vector or k outside [1, size].
std::vector<RankedHit> rank_by_hyperplane(const VectorStore& store, const LinearSeparator& sep,
                                          std::size_t k);

enum class CoresetMethod { kUniform, kKCenterGreedy };

CoresetMethod parse_coreset_method(std::string_view name);

struct CoresetSpec {
  std::size_t size = 1;
  CoresetMethod method = CoresetMethod::kKCenterGreedy;
  std::uint64_t seed = 0;
};

// Query-independent subset of the store used as negatives for fast training.
// k-center-greedy starts at the item nearest the centroid and repeatedly adds
// the item farthest (euclidean) from the chosen set; ties go to the lower id.
std::vector<ItemId> build_coreset(const VectorStore& store, const CoresetSpec& spec);

}  // namespace simsearch
