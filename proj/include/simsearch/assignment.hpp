#pragma once

#include <optional>
#include <vector>

#include "simsearch/error.hpp"

namespace simsearch {

template <typename T>
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

using CostMatrix = DenseMatrix<double>;
using EligibilityMask = DenseMatrix<unsigned char>;  // nonzero = row may take column

struct Assignment {
  std::vector<std::size_t> columns;  // columns[row]
  double total = 0.0;                // sum of cost(row, columns[row]) in row order
};

// Minimum-cost injective row -> column assignment (Hungarian method with
// potentials, O(rows^2 * cols)). Requires rows <= cols. Returns nullopt when the
// mask admits no complete assignment.
std::optional<Assignment> optimal_assignment(const CostMatrix& cost,
                                             const EligibilityMask* mask = nullptr);

}  // namespace simsearch
