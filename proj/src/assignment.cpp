#include "simsearch/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace simsearch {

namespace {

// Kuhn's augmenting paths; true iff every row can be matched to an eligible column.
bool has_complete_matching(const EligibilityMask& mask) {
  const std::size_t rows = mask.rows(), cols = mask.cols();
  std::vector<std::ptrdiff_t> owner(cols, -1);
  std::vector<char> visited;
  std::function<bool(std::size_t)> augment = [&](std::size_t r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!mask(r, c) || visited[c]) continue;
      visited[c] = 1;
      if (owner[c] < 0 || augment(static_cast<std::size_t>(owner[c]))) {
        owner[c] = static_cast<std::ptrdiff_t>(r);
        return true;
      }
    }
    return false;
  };
  for (std::size_t r = 0; r < rows; ++r) {
    visited.assign(cols, 0);
    if (!augment(r)) return false;
  }
  return true;
}

}  // namespace

std::optional<Assignment> optimal_assignment(const CostMatrix& cost, const EligibilityMask* mask) {
  const std::size_t n = cost.rows(), m = cost.cols();
  if (n > m) throw InvalidArgument("optimal_assignment: more rows than columns");
  if (mask && (mask->rows() != n || mask->cols() != m))
    throw InvalidArgument("optimal_assignment: mask shape differs from cost shape");
  if (n == 0) return Assignment{};

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) {
      if (!std::isfinite(cost(r, c))) throw InvalidArgument("optimal_assignment: non-finite cost");
      lo = std::min(lo, cost(r, c));
      hi = std::max(hi, cost(r, c));
    }

  // Ineligible cells get a penalty larger than any spread of feasible totals,
  // so once a complete eligible matching exists the optimum avoids them.
  double penalty = 0.0;
  if (mask) {
    if (!has_complete_matching(*mask)) return std::nullopt;
    penalty = static_cast<double>(n) * (std::abs(hi) + std::abs(lo)) + 1.0;
  }
  auto a = [&](std::size_t r, std::size_t c) {
    return (mask && !(*mask)(r, c)) ? hi + penalty : cost(r, c);
  };

  // 1-indexed potentials formulation; p[j] is the row matched to column j.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment result;
  result.columns.assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) result.columns[p[j] - 1] = j - 1;
  for (std::size_t r = 0; r < n; ++r) {
    if (mask && !(*mask)(r, result.columns[r])) return std::nullopt;
    result.total += cost(r, result.columns[r]);
  }
  return result;
}

}  // namespace simsearch
