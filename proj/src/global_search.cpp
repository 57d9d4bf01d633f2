#include "simsearch/global_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace simsearch {

double LinearSeparator::decision(EmbeddingView x) const {
  if (x.size() != w.size()) throw DimensionMismatch(w.size(), x.size());
  double s = b;
  for (std::size_t d = 0; d < w.size(); ++d) s += w[d] * static_cast<double>(x[d]);
  return s;
}

double LinearSeparator::norm() const {
  double s = 0.0;
  for (double v : w) s += v * v;
  return std::sqrt(s);
}

double LinearSeparator::signed_distance(EmbeddingView x) const {
  const double n = norm();
  if (n == 0.0) throw InvalidArgument("separator has a zero weight vector");
  return decision(x) / n;
}

void SvmParams::validate() const {
  if (!(reg_c > 0.0) || !std::isfinite(reg_c)) throw InvalidArgument("reg_c must be positive");
  if (epochs == 0) throw InvalidArgument("epochs must be at least 1");
  if (positive_weight && !(*positive_weight > 0.0))
    throw InvalidArgument("positive_weight must be positive");
}

namespace {

// Training set in the (optionally standardized) space with a trailing constant
// feature standing in for the bias.
struct TrainingSet {
  std::size_t dim = 0;               // original dimension
  std::vector<double> x;             // rows of dim + 1
  std::vector<double> y;             // +1 / -1
  std::vector<double> weight;        // per-example hinge multiplier
  std::vector<double> mean, scale;   // standardization, identity when disabled

  std::size_t rows() const { return y.size(); }
  const double* row(std::size_t i) const { return x.data() + i * (dim + 1); }
};

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double objective(const TrainingSet& ts, const std::vector<double>& theta, double reg,
                 double weight_sum) {
  const std::size_t n = ts.dim + 1;
  double loss = 0.0;
  for (std::size_t i = 0; i < ts.rows(); ++i) {
    const double margin = ts.y[i] * dot(theta.data(), ts.row(i), n);
    if (margin < 1.0) loss += ts.weight[i] * (1.0 - margin);
  }
  return 0.5 * reg * dot(theta.data(), theta.data(), n) + loss / weight_sum;
}

TrainingSet build_training_set(const VectorStore& store, std::span<const std::size_t> negative_rows,
                               std::span<const Embedding> positives, const SvmParams& params) {
  params.validate();
  if (negative_rows.empty()) throw InvalidArgument("train_separator: no negative examples");
  if (positives.empty()) throw InvalidArgument("train_separator: no positive examples");
  const std::size_t dim = store.dim();
  for (const auto& p : positives) {
    if (p.size() != dim) throw DimensionMismatch(dim, p.size());
  }

  TrainingSet ts;
  ts.dim = dim;
  ts.mean.assign(dim, 0.0);
  ts.scale.assign(dim, 1.0);

  auto for_each_point = [&](auto&& fn) {
    for (std::size_t row : negative_rows) fn(store.embedding_at(row));
    for (const auto& p : positives) fn(EmbeddingView(p));
  };

  if (params.standardize) {
    const double count = static_cast<double>(negative_rows.size() + positives.size());
    for_each_point([&](EmbeddingView v) {
      for (std::size_t d = 0; d < dim; ++d) ts.mean[d] += v[d];
    });
    for (auto& m : ts.mean) m /= count;
    std::vector<double> var(dim, 0.0);
    for_each_point([&](EmbeddingView v) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = v[d] - ts.mean[d];
        var[d] += c * c;
      }
    });
    for (std::size_t d = 0; d < dim; ++d) {
      const double sd = std::sqrt(var[d] / count);
      ts.scale[d] = sd > 0.0 ? sd : 1.0;
    }
  }

  const double pos_weight =
      params.positive_weight.value_or(static_cast<double>(negative_rows.size()) /
                                      static_cast<double>(positives.size()));

  auto push = [&](EmbeddingView v, double label, double weight) {
    for (std::size_t d = 0; d < dim; ++d) ts.x.push_back((v[d] - ts.mean[d]) / ts.scale[d]);
    ts.x.push_back(1.0);
    ts.y.push_back(label);
    ts.weight.push_back(weight);
  };
  for (std::size_t row : negative_rows) push(store.embedding_at(row), -1.0, 1.0);
  for (const auto& p : positives) push(EmbeddingView(p), +1.0, pos_weight);
  return ts;
}

LinearSeparator train(const TrainingSet& ts, const SvmParams& params, TrainingReport* report) {
  const std::size_t n = ts.dim + 1;
  const double weight_sum = std::accumulate(ts.weight.begin(), ts.weight.end(), 0.0);
  // reg/2 ||theta||^2 + (1/W) sum_i c_i hinge_i is the C-SVM objective divided by C*W.
  const double reg = 1.0 / (params.reg_c * weight_sum);
  const double radius = 1.0 / std::sqrt(reg);

  std::mt19937_64 rng(params.seed);
  std::discrete_distribution<std::size_t> pick(ts.weight.begin(), ts.weight.end());

  std::vector<double> theta(n, 0.0), avg(n, 0.0);
  std::vector<double> best = theta;
  double best_obj = objective(ts, theta, reg, weight_sum);
  std::size_t t = 0;
  const std::size_t steps_per_epoch = ts.rows();

  if (report) report->epoch_objective.clear();
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    std::fill(avg.begin(), avg.end(), 0.0);
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      ++t;
      const std::size_t i = pick(rng);
      const double* xi = ts.row(i);
      const double margin = ts.y[i] * dot(theta.data(), xi, n);
      const double eta = 1.0 / (reg * static_cast<double>(t));
      const double shrink = 1.0 - 1.0 / static_cast<double>(t);
      for (std::size_t d = 0; d < n; ++d) theta[d] *= shrink;
      if (margin < 1.0) {
        for (std::size_t d = 0; d < n; ++d) theta[d] += eta * ts.y[i] * xi[d];
      }
      const double norm = std::sqrt(dot(theta.data(), theta.data(), n));
      if (norm > radius) {
        for (auto& v : theta) v *= radius / norm;
      }
      for (std::size_t d = 0; d < n; ++d) avg[d] += theta[d];
    }
    for (auto& v : avg) v /= static_cast<double>(steps_per_epoch);

    for (const auto* candidate : {&avg, &theta}) {
      const double obj = objective(ts, *candidate, reg, weight_sum);
      if (obj < best_obj) {
        best_obj = obj;
        best = *candidate;
      }
    }
    if (report) report->epoch_objective.push_back(best_obj);
  }

  // Undo standardization: w_d / s_d, b - sum_d w_d m_d / s_d.
  LinearSeparator sep;
  sep.w.resize(ts.dim);
  sep.b = best[ts.dim];
  for (std::size_t d = 0; d < ts.dim; ++d) {
    sep.w[d] = best[d] / ts.scale[d];
    sep.b -= sep.w[d] * ts.mean[d];
  }
  return sep;
}

}  // namespace

LinearSeparator train_separator(const VectorStore& store, std::span<const Embedding> positives,
                                const SvmParams& params, TrainingReport* report) {
  if (store.empty()) throw InvalidArgument("train_separator: empty store");
  std::vector<std::size_t> rows(store.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return train(build_training_set(store, rows, positives, params), params, report);
}

LinearSeparator train_separator(const VectorStore& store, std::span<const ItemId> negative_ids,
                                std::span<const Embedding> positives, const SvmParams& params,
                                TrainingReport* report) {
  if (store.empty()) throw InvalidArgument("train_separator: empty store");
  std::vector<std::size_t> rows;
  rows.reserve(negative_ids.size());
  for (ItemId id : negative_ids) rows.push_back(store.require_row(id));
  return train(build_training_set(store, rows, positives, params), params, report);
}

std::vector<RankedHit> rank_by_hyperplane(const VectorStore& store, const LinearSeparator& sep,
                                          std::size_t k) {
  if (sep.w.size() != store.dim()) throw DimensionMismatch(store.dim(), sep.w.size());
  const double norm = sep.norm();
  if (norm == 0.0) throw InvalidArgument("rank_by_hyperplane: zero weight vector");
  if (k == 0 || k > store.size())
    throw InvalidArgument("rank_by_hyperplane: k must lie in [1, " +
                          std::to_string(store.size()) + "]");
  std::vector<RankedHit> hits(store.size());
  for (std::size_t row = 0; row < store.size(); ++row)
    hits[row] = RankedHit{store.id_at(row), -sep.decision(store.embedding_at(row)) / norm};
  return select_topk(std::move(hits), k);
}

CoresetMethod parse_coreset_method(std::string_view name) {
  if (name == "uniform") return CoresetMethod::kUniform;
  if (name == "k-center-greedy" || name == "kcenter") return CoresetMethod::kKCenterGreedy;
  throw InvalidArgument("unknown coreset method: " + std::string(name));
}

std::vector<ItemId> build_coreset(const VectorStore& store, const CoresetSpec& spec) {
  const std::size_t n = store.size();
  if (spec.size == 0 || spec.size > n)
    throw InvalidArgument("coreset size must lie in [1, " + std::to_string(n) + "]");

  if (spec.method == CoresetMethod::kUniform) {
    std::vector<ItemId> ids = store.ids();
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(spec.seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(spec.size);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  const std::size_t dim = store.dim();
  std::vector<double> centroid(dim, 0.0);
  for (std::size_t row = 0; row < n; ++row) {
    auto v = store.embedding_at(row);
    for (std::size_t d = 0; d < dim; ++d) centroid[d] += v[d];
  }
  for (auto& c : centroid) c /= static_cast<double>(n);

  auto better = [&](double da, std::size_t ra, double db, std::size_t rb, bool larger) {
    if (da != db) return larger ? da > db : da < db;
    return store.id_at(ra) < store.id_at(rb);
  };

  std::vector<double> as_double(dim);
  std::size_t start = 0;
  double start_dist = std::numeric_limits<double>::infinity();
  for (std::size_t row = 0; row < n; ++row) {
    auto v = store.embedding_at(row);
    std::copy(v.begin(), v.end(), as_double.begin());
    const double d = distance(std::span<const double>(as_double), centroid, Metric::kEuclidean);
    if (row == 0 || better(d, row, start_dist, start, false)) {
      start = row;
      start_dist = d;
    }
  }

  std::vector<ItemId> chosen{store.id_at(start)};
  std::vector<bool> taken(n, false);
  taken[start] = true;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t last = start;
  while (chosen.size() < spec.size) {
    std::size_t far = n;
    for (std::size_t row = 0; row < n; ++row) {
      if (taken[row]) continue;
      nearest[row] = std::min(
          nearest[row], distance(store.embedding_at(last), store.embedding_at(row), Metric::kEuclidean));
      if (far == n || better(nearest[row], row, nearest[far], far, true)) far = row;
    }
    taken[far] = true;
    chosen.push_back(store.id_at(far));
    last = far;
  }
  return chosen;
}

}  // namespace simsearch
