#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "simsearch/global_search.hpp"
#include "simsearch/synthetic.hpp"

using namespace simsearch;

namespace {

// Negatives around (-5, 0) with sigma 0.1.
VectorStore negative_blob(std::uint64_t seed, std::size_t n = 100) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  VectorStore s(2);
  for (std::size_t i = 0; i < n; ++i) {
    const Embedding v{static_cast<float>(-5.0 + g(rng)), static_cast<float>(g(rng))};
    s.add(v);
  }
  return s;
}

// Farthest-point iteration written out directly.
std::vector<ItemId> kcenter_oracle(const VectorStore& s, std::size_t size) {
  std::vector<double> c(s.dim(), 0.0);
  for (std::size_t r = 0; r < s.size(); ++r)
    for (std::size_t d = 0; d < s.dim(); ++d) c[d] += s.embedding_at(r)[d];
  for (auto& v : c) v /= static_cast<double>(s.size());
  auto dist_c = [&](std::size_t r) {
    double acc = 0.0;
    for (std::size_t d = 0; d < s.dim(); ++d) acc += (s.embedding_at(r)[d] - c[d]) * (s.embedding_at(r)[d] - c[d]);
    return std::sqrt(acc);
  };
  std::size_t start = 0;
  for (std::size_t r = 1; r < s.size(); ++r)
    if (dist_c(r) < dist_c(start)) start = r;
  std::vector<std::size_t> chosen{start};
  while (chosen.size() < size) {
    std::size_t best = s.size();
    double best_d = -1.0;
    for (std::size_t r = 0; r < s.size(); ++r) {
      if (std::find(chosen.begin(), chosen.end(), r) != chosen.end()) continue;
      double nearest = std::numeric_limits<double>::infinity();
      for (auto o : chosen) nearest = std::min(nearest, distance(s.embedding_at(r), s.embedding_at(o), Metric::kEuclidean));
      if (nearest > best_d) {
        best_d = nearest;
        best = r;
      }
    }
    chosen.push_back(best);
  }
  std::vector<ItemId> ids;
  for (auto r : chosen) ids.push_back(s.id_at(r));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<ItemId> sorted(std::vector<ItemId> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(TrainSeparator, SeparatesPositiveFromBlob) {
  const auto s = negative_blob(1);
  const std::vector<Embedding> pos{{5.0f, 0.0f}};
  SvmParams p;
  const auto sep = train_separator(s, pos, p);
  EXPECT_GT(sep.decision(pos[0]), 0.0);
  for (std::size_t r = 0; r < s.size(); ++r) EXPECT_LT(sep.decision(s.embedding_at(r)), 0.0);
}

TEST(TrainSeparator, DeterministicForSeed) {
  const auto s = negative_blob(2);
  const std::vector<Embedding> pos{{5.0f, 1.0f}};
  SvmParams p;
  p.seed = 9;
  const auto a = train_separator(s, pos, p), b = train_separator(s, pos, p);
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.b, b.b);
}

TEST(TrainSeparator, ObjectiveDoesNotIncrease) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = synthetic::separable_clusters(seed);
    SvmParams p;
    p.seed = seed;
    TrainingReport report;
    train_separator(d.store, d.negative_ids, d.positives, p, &report);
    ASSERT_EQ(report.epoch_objective.size(), p.epochs);
    EXPECT_LE(report.epoch_objective.back(), report.epoch_objective.front() + 1e-9);
  }
}

TEST(TrainSeparator, DegeneratePositiveStillCompletes) {
  const auto s = negative_blob(3, 20);
  const std::vector<Embedding> pos{Embedding(s.embedding_at(4).begin(), s.embedding_at(4).end())};
  SvmParams p;
  const auto sep = train_separator(s, pos, p);
  for (double v : sep.w) EXPECT_TRUE(std::isfinite(v));
}

TEST(TrainSeparator, Errors) {
  const auto s = negative_blob(4, 5);
  SvmParams p;
  EXPECT_THROW(train_separator(s, std::vector<Embedding>{}, p), InvalidArgument);
  VectorStore empty(2);
  const std::vector<Embedding> pos{{1.0f, 1.0f}};
  EXPECT_THROW(train_separator(empty, pos, p), InvalidArgument);
  p.reg_c = 0.0;
  EXPECT_THROW(train_separator(s, pos, p), InvalidArgument);
  p.reg_c = 1.0;
  p.epochs = 0;
  EXPECT_THROW(train_separator(s, pos, p), InvalidArgument);
  p.epochs = 10;
  const std::vector<Embedding> wrong{{1.0f}};
  EXPECT_THROW(train_separator(s, wrong, p), DimensionMismatch);
}

TEST(TrainSeparator, StandardizeOptionSeparates) {
  const auto d = synthetic::separable_clusters(5);
  SvmParams p;
  p.standardize = true;
  const auto sep = train_separator(d.store, d.negative_ids, d.positives, p);
  for (ItemId id : d.positive_ids) EXPECT_GT(sep.decision(d.store.embedding(id)), 0.0);
  for (ItemId id : d.negative_ids) EXPECT_LT(sep.decision(d.store.embedding(id)), 0.0);
}

TEST(RankByHyperplane, PositiveSideFirst) {
  const auto d = synthetic::separable_clusters(6);
  SvmParams p;
  const auto sep = train_separator(d.store, d.negative_ids, d.positives, p);
  const auto top = rank_by_hyperplane(d.store, sep, d.positive_ids.size());
  EXPECT_EQ(sorted(ids_of(top)), sorted(d.positive_ids));
}

TEST(RankByHyperplane, ScoreIsNegatedSignedDistance) {
  LinearSeparator sep{{3.0, 4.0}, -1.0};
  VectorStore s(2);
  const Embedding a{1, 1}, b{-1, 0};
  s.add(a);
  s.add(b);
  const auto hits = rank_by_hyperplane(s, sep, 2);
  EXPECT_EQ(hits[0].id, 0u);
  EXPECT_DOUBLE_EQ(hits[0].score, -(3 + 4 - 1) / 5.0);
  EXPECT_DOUBLE_EQ(hits[1].score, -(-3 - 1) / 5.0);
}

TEST(RankByHyperplane, FullOrderingAndScaleInvariance) {
  std::mt19937_64 rng(7);
  const auto s = oracle::random_store(rng, 80, 3);
  LinearSeparator sep{{0.3, -1.2, 0.7}, 0.4};
  const auto base = rank_by_hyperplane(s, sep, s.size());
  EXPECT_EQ(base.size(), s.size());
  EXPECT_TRUE(std::is_sorted(base.begin(), base.end(), hit_before));
  LinearSeparator scaled{{0.3 * 7.5, -1.2 * 7.5, 0.7 * 7.5}, 0.4 * 7.5};
  EXPECT_EQ(ids_of(rank_by_hyperplane(s, scaled, s.size())), ids_of(base));
}

TEST(RankByHyperplane, ZeroWeightRejected) {
  VectorStore s(2);
  const Embedding a{1, 1};
  s.add(a);
  EXPECT_THROW(rank_by_hyperplane(s, LinearSeparator{{0.0, 0.0}, 1.0}, 1), InvalidArgument);
}

TEST(BuildCoreset, FullSizeIsAllIds) {
  std::mt19937_64 rng(8);
  const auto s = oracle::random_store(rng, 30, 2);
  for (auto method : {CoresetMethod::kUniform, CoresetMethod::kKCenterGreedy})
    EXPECT_EQ(sorted(build_coreset(s, {30, method, 1})), sorted(s.ids()));
}

TEST(BuildCoreset, SizeOneIsCentroidNearest) {
  VectorStore s(2);
  for (const Embedding& v : std::vector<Embedding>{{0, 0}, {10, 0}, {0, 10}, {4, 4}, {10, 10}}) s.add(v);
  EXPECT_EQ(build_coreset(s, {1, CoresetMethod::kKCenterGreedy, 0}), (std::vector<ItemId>{3}));
}

TEST(BuildCoreset, SquareCornersPlusCentre) {
  VectorStore s(2);
  for (int i = 0; i < 100; ++i) {
    const Embedding c{0.0f, 0.0f};
    s.add(c);
  }
  for (const Embedding& v : std::vector<Embedding>{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}) s.add(v);
  const auto ids = sorted(build_coreset(s, {5, CoresetMethod::kKCenterGreedy, 0}));
  EXPECT_EQ(ids, (std::vector<ItemId>{0, 100, 101, 102, 103}));
}

TEST(BuildCoreset, KCenterMatchesOracle) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    const auto s = oracle::random_store(rng, 10 + rng() % 60, 1 + rng() % 4);
    const std::size_t size = 1 + rng() % s.size();
    EXPECT_EQ(sorted(build_coreset(s, {size, CoresetMethod::kKCenterGreedy, 0})), kcenter_oracle(s, size));
  }
}

TEST(BuildCoreset, UniformDistinctAndDeterministic) {
  std::mt19937_64 rng(10);
  const auto s = oracle::random_store(rng, 50, 2);
  const auto a = build_coreset(s, {20, CoresetMethod::kUniform, 3});
  const auto b = build_coreset(s, {20, CoresetMethod::kUniform, 3});
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::set<ItemId>(a.begin(), a.end()).size(), 20u);
  EXPECT_THROW(build_coreset(s, {51, CoresetMethod::kUniform, 3}), InvalidArgument);
}

TEST(BuildCoreset, CoresetTrainingTracksFullTraining) {
  double jaccard = 0.0;
  constexpr int kSeeds = 10;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto d = synthetic::correlated_corner(seed);
    const std::vector<Embedding> pos{d.query};
    SvmParams p;
    p.seed = seed;
    const auto full = rank_by_hyperplane(d.store, train_separator(d.store, pos, p), 20);
    const auto core = build_coreset(d.store, {d.store.size() / 10, CoresetMethod::kKCenterGreedy, 0});
    const auto small = rank_by_hyperplane(d.store, train_separator(d.store, core, pos, p), 20);
    std::set<ItemId> a, b, u;
    for (auto& h : full) a.insert(h.id);
    for (auto& h : small) b.insert(h.id);
    std::size_t inter = 0;
    for (auto id : a) inter += b.count(id);
    u = a;
    u.insert(b.begin(), b.end());
    jaccard += static_cast<double>(inter) / static_cast<double>(u.size());
  }
  EXPECT_GE(jaccard / kSeeds, 0.7);
}
