#include "simsearch/projection.hpp"

#include <algorithm>
#include <cmath>

namespace simsearch {

namespace {

using Matrix = std::vector<std::vector<double>>;

std::vector<double> multiply(const Matrix& a, const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += a[i][j] * v[j];
  return out;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

Projection pca_project(const VectorStore& store, std::size_t dims, std::size_t iterations) {
  if (store.empty()) throw InvalidArgument("projection of an empty store");
  const std::size_t d = store.dim();
  if (dims == 0 || dims > d) throw InvalidArgument("projection dims must lie in [1, " + std::to_string(d) + "]");
  const std::size_t n = store.size();

  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) mean[j] += store.embedding_at(r)[j];
  for (auto& m : mean) m /= static_cast<double>(n);

  Matrix cov(d, std::vector<double>(d, 0.0));
  for (std::size_t r = 0; r < n; ++r) {
    const auto e = store.embedding_at(r);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i][j] += (e[i] - mean[i]) * (e[j] - mean[j]);
  }
  for (auto& row : cov)
    for (auto& x : row) x /= static_cast<double>(n);

  Projection p;
  p.dims = dims;
  for (std::size_t c = 0; c < dims; ++c) {
    // Deterministic start that is unlikely to be orthogonal to the top axis.
    std::vector<double> v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = 1.0 + 0.1 * static_cast<double>(j);
    double lambda = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
      auto next = multiply(cov, v);
      const double len = norm(next);
      if (len == 0.0) break;
      for (auto& x : next) x /= len;
      v = std::move(next);
    }
    const double len = norm(v);
    for (auto& x : v) x /= len;
    const auto cv = multiply(cov, v);
    for (std::size_t j = 0; j < d; ++j) lambda += v[j] * cv[j];
    const auto big = std::max_element(v.begin(), v.end(),
                                      [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (*big < 0)
      for (auto& x : v) x = -x;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i][j] -= lambda * v[i] * v[j];
    p.components.push_back(v);
    p.variances.push_back(std::max(lambda, 0.0));
  }

  for (std::size_t r = 0; r < n; ++r) {
    const auto e = store.embedding_at(r);
    std::vector<double> xy(dims, 0.0);
    for (std::size_t c = 0; c < dims; ++c)
      for (std::size_t j = 0; j < d; ++j) xy[c] += (e[j] - mean[j]) * p.components[c][j];
    p.ids.push_back(store.id_at(r));
    p.coords.push_back(std::move(xy));
  }
  return p;
}

}  // namespace simsearch
