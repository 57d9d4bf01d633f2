#pragma once

#include <vector>

#include "simsearch/core.hpp"

namespace simsearch {

struct Projection {
  std::size_t dims = 0;
  std::vector<ItemId> ids;                      // row order of the store
  std::vector<std::vector<double>> coords;      // coords[i] has `dims` entries
  std::vector<std::vector<double>> components;  // unit principal axes
  std::vector<double> variances;                // eigenvalues, descending
};

// PCA by power iteration with deflation on the covariance matrix. Component
// signs are fixed so that the largest-magnitude entry is positive. Throws
// InvalidArgument for an empty store or dims outside [1, store.dim()].
Projection pca_project(const VectorStore& store, std::size_t dims = 2, std::size_t iterations = 500);

}  // namespace simsearch
