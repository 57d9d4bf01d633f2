// Acceptance suite: one PASS/FAIL line per criterion, with the measured
// values, the pinned threshold and the wall-clock limit. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "simsearch/assignment.hpp"
#include "simsearch/core.hpp"
#include "simsearch/feedback.hpp"
#include "simsearch/global_search.hpp"
#include "simsearch/local_search.hpp"
#include "simsearch/multibody.hpp"
#include "simsearch/planner.hpp"
#include "simsearch/subsequence.hpp"
#include "simsearch/synthetic.hpp"

using namespace simsearch;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Outcome lambda_zero_reduction() {
  std::mt19937_64 rng(1001);
  std::size_t mismatches = 0;
  constexpr std::size_t kInstances = 1000;
  for (std::size_t t = 0; t < kInstances; ++t) {
    const std::size_t dim = pick(rng, 1, 8), n = pick(rng, 1, 500), k = pick(rng, 1, n);
    const auto store = oracle::random_store(rng, n, dim);
    const auto q = oracle::random_vector(rng, dim);
    LocalSearchParams p;
    p.k = k;
    p.lambda = 0.0;
    p.batch_size = pick(rng, 1, k);
    const auto local = iterative_topk(store, q, p);
    const auto exact = exact_topk(store, q, k);
    if (ids_of(local) != ids_of(exact) || ids_of(exact) != ids_of(oracle::topk(store, q, k))) ++mismatches;
  }
  return {mismatches == 0, fmt("%zu/%zu instances identical (ids and order)", kInstances - mismatches, kInstances)};
}

Outcome greedy_optimality() {
  std::mt19937_64 rng(2002);
  constexpr std::size_t kInstances = 200;
  std::size_t bad = 0, accepted = 0;
  for (std::size_t t = 0; t < kInstances; ++t) {
    const std::size_t dim = pick(rng, 1, 6), n = pick(rng, 2, 150), k = pick(rng, 1, std::min<std::size_t>(n, 25));
    const auto store = oracle::random_store(rng, n, dim);
    const auto q = oracle::random_vector(rng, dim);
    LocalSearchParams p;
    p.k = k;
    p.lambda = t % 4 == 0 ? 1.0 : uniform(rng, 0.0, 1.0);
    p.batch_size = t % 2 == 0 ? 1 : pick(rng, 1, k);
    p.metric = t % 5 == 0 ? Metric::kCosine : Metric::kEuclidean;
    const auto hits = iterative_topk(store, q, p);
    accepted += hits.size();
    const auto ids = ids_of(hits);
    const std::set<ItemId> unique(ids.begin(), ids.end());
    if (hits.size() != k || unique.size() != k || oracle::greedy_violations(store, q, p, hits) != 0) ++bad;
  }
  return {bad == 0, fmt("%zu/%zu instances greedy-optimal at every round (%zu accepted items rescored)",
                        kInstances - bad, kInstances, accepted)};
}

Outcome cluster_purity_gain() {
  constexpr std::size_t kSeeds = 100, kK = 50;
  double sum_classic = 0.0, sum_local = 0.0;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    const auto d = synthetic::two_clusters(s, 500, 1.0, 3.0);
    LocalSearchParams p;
    p.k = kK;
    p.lambda = 0.9;
    sum_classic += cluster_purity(exact_topk(d.store, d.query, kK), d.store, d.query_class);
    sum_local += cluster_purity(iterative_topk(d.store, d.query, p), d.store, d.query_class);
  }
  const double delta = (sum_local - sum_classic) / kSeeds;
  return {delta >= 0.05, fmt("mean purity classic %.4f, local %.4f, delta %+.4f (need >= +0.05)",
                             sum_classic / kSeeds, sum_local / kSeeds, delta)};
}

Outcome table_protocol() {
  const auto log = synthetic::planted_task_log(4004);
  std::size_t total = 0;
  bool ok = true;
  double worst_overlap = 0.0, min_f1 = 1.0;
  for (std::size_t t = 0; t < log.templates.size(); ++t) {
    const auto& truth = log.instances[t];
    total += truth.size();
    for (auto mode : {RetrievalMode::kClassic, RetrievalMode::kLocal}) {
      const auto kept = retrieve_task_instances(log.series, log.templates[t], truth.size(), mode);
      const auto s = evaluate_retrieval(kept, truth);
      ok = ok && kept.size() == truth.size() && s.precision == s.recall && s.recall == s.f1;
      min_f1 = std::min(min_f1, s.f1);
      for (std::size_t i = 0; i < kept.size(); ++i)
        for (std::size_t j = i + 1; j < kept.size(); ++j)
          worst_overlap = std::max(worst_overlap, overlap_ratio(kept[i].interval(), kept[j].interval()));
    }
  }
  ok = ok && total == 72 && worst_overlap <= 0.10;
  return {ok, fmt("%zu planted instances over %zu tasks, P==R==F1 in every run, min F1 %.3f, "
                  "max pairwise overlap %.3f (limit 0.10)",
                  total, log.templates.size(), min_f1, worst_overlap)};
}

Outcome svm_separation() {
  constexpr std::size_t kInstances = 100;
  std::size_t ok = 0;
  for (std::size_t s = 0; s < kInstances; ++s) {
    const auto d = synthetic::separable_clusters(s);
    SvmParams p;
    p.epochs = 200;
    p.seed = s;
    const auto sep = train_separator(d.store, d.negative_ids, d.positives, p);
    bool good = true;
    for (ItemId id : d.positive_ids) good = good && sep.decision(d.store.embedding(id)) > 0.0;
    for (ItemId id : d.negative_ids) good = good && sep.decision(d.store.embedding(id)) < 0.0;
    const auto top = rank_by_hyperplane(d.store, sep, d.positive_ids.size());
    for (const auto& h : top) good = good && sep.decision(d.store.embedding(h.id)) > 0.0 && h.score < 0.0;
    ok += good ? 1 : 0;
  }
  return {ok == kInstances,
          fmt("%zu/%zu instances: all training signs correct and top-k on the positive side", ok, kInstances)};
}

double mean_projection(const VectorStore& store, std::span<const RankedHit> hits, const double c[2], const double u[2]) {
  double sum = 0.0;
  for (const auto& h : hits) {
    const auto x = store.embedding(h.id);
    sum += (x[0] - c[0]) * u[0] + (x[1] - c[1]) * u[1];
  }
  return sum / static_cast<double>(hits.size());
}

Outcome corner_query() {
  constexpr std::size_t kSeeds = 100, kK = 20;
  std::size_t wins = 0;
  double sum_svm = 0.0, sum_euc = 0.0;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    const auto d = synthetic::correlated_corner(s);
    double c[2] = {0.0, 0.0};
    for (std::size_t r = 0; r < d.store.size(); ++r) {
      c[0] += d.store.embedding_at(r)[0];
      c[1] += d.store.embedding_at(r)[1];
    }
    c[0] /= static_cast<double>(d.store.size());
    c[1] /= static_cast<double>(d.store.size());
    double u[2] = {d.query[0] - c[0], d.query[1] - c[1]};
    const double len = std::hypot(u[0], u[1]);
    u[0] /= len;
    u[1] /= len;
    SvmParams p;
    p.seed = s;
    const std::vector<Embedding> positives{d.query};
    const auto sep = train_separator(d.store, positives, p);
    const double svm = mean_projection(d.store, rank_by_hyperplane(d.store, sep, kK), c, u);
    const double euc = mean_projection(d.store, exact_topk(d.store, d.query, kK), c, u);
    sum_svm += svm;
    sum_euc += euc;
    wins += svm > euc ? 1 : 0;
  }
  return {wins >= 90, fmt("SVM top-20 projects further in %zu/%zu seeds (need >= 90); mean %.3f vs %.3f",
                          wins, kSeeds, sum_svm / kSeeds, sum_euc / kSeeds)};
}

Outcome multibody_oracle() {
  constexpr std::size_t kInstances = 500;
  std::size_t ok = 0, feasible = 0, assignment_cases = 0;
  auto same = [](const std::optional<Alignment>& a, const std::optional<Alignment>& b) {
    return a.has_value() == b.has_value() && (!a || a->score == b->score);
  };
  for (std::size_t s = 0; s < kInstances; ++s) {
    const auto inst = synthetic::random_multibody(5000 + s, 20, 3);
    const auto brute = brute_force_best(inst.objects, inst.query, inst.constraints);
    const auto enumerated = oracle::enumerate_alignments(inst.objects, inst.query, inst.constraints);
    bool good = brute.has_value() == enumerated.best_score.has_value() &&
                (!brute || (brute->score == *enumerated.best_score &&
                            oracle::alignment_valid(inst.objects, inst.query, inst.constraints, *brute)));
    const auto po = strategy_per_object(inst.objects, inst.query, inst.constraints, 1 + s % 4);
    const auto cf = strategy_constraint_first(inst.objects, inst.query, inst.constraints);
    good = good && same(brute, po) && same(brute, cf);
    for (const auto* a : {&po, &cf})
      if (*a) good = good && oracle::alignment_valid(inst.objects, inst.query, inst.constraints, **a);
    if (eligibility_only(inst.constraints)) {
      ++assignment_cases;
      good = good && same(brute, assignment_best(inst.objects, inst.query, inst.constraints));
    }
    feasible += brute ? 1 : 0;
    ok += good ? 1 : 0;
  }
  std::vector<SceneObject> four(4);
  for (std::size_t i = 0; i < 4; ++i) {
    four[i].object_id = i;
    four[i].class_label = "player";
    four[i].embedding = {static_cast<float>(i)};
  }
  MultiQuery two;
  two.objects = {{"player", {0.0f}}, {"player", {1.0f}}};
  const auto count = count_alignments(4, 2);
  const auto enumerated = oracle::enumerate_alignments(four, two, {}).mappings;
  const bool count_ok = count == 12 && enumerated == 12;
  return {ok == kInstances && count_ok,
          fmt("%zu/%zu instances match brute force (%zu feasible, %zu assignment cases); "
              "count_alignments(4,2)=%llu, enumerated %zu",
              ok, kInstances, feasible, assignment_cases, static_cast<unsigned long long>(count), enumerated)};
}

Outcome hungarian() {
  std::mt19937_64 rng(8008);
  constexpr std::size_t kInstances = 200;
  std::size_t ok = 0;
  for (std::size_t t = 0; t < kInstances; ++t) {
    const std::size_t m = pick(rng, 1, 6), n = pick(rng, m, 9);
    CostMatrix cost(m, n);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c)
        cost(r, c) = t % 3 == 0 ? static_cast<double>(pick(rng, 0, 5)) : uniform(rng, -10.0, 10.0);
    EligibilityMask mask(m, n, 1);
    const bool masked = t % 2 == 1;
    if (masked)
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) mask(r, c) = uniform(rng, 0, 1) < 0.7 ? 1 : 0;
    const auto got = optimal_assignment(cost, masked ? &mask : nullptr);
    const auto want = oracle::assignment_brute_force(cost, masked ? &mask : nullptr);
    bool good = got.has_value() == want.has_value();
    if (good && got) {
      std::set<std::size_t> cols(got->columns.begin(), got->columns.end());
      double total = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        total += cost(r, got->columns[r]);
        good = good && (!masked || mask(r, got->columns[r]));
      }
      good = good && cols.size() == m && total == got->total && got->total == *want;
    }
    ok += good ? 1 : 0;
  }
  return {ok == kInstances, fmt("%zu/%zu matrices (up to 6x9, half masked) equal permutation brute force", ok, kInstances)};
}

Outcome feedback_infeasibility() {
  VectorStore store(1);
  for (float x : {2.0f, 2.0f, 1.0f, 3.0f}) store.add(std::span<const float>(&x, 1));
  const std::vector<ItemId> negatives{0, 1}, positives{2, 3};
  const std::vector<Embedding> pos_vecs{{1.0f}, {3.0f}}, neg_vecs{{2.0f}, {2.0f}};
  std::size_t checked = 0, satisfied = 0;
  for (int qi = -20; qi <= 20; ++qi) {
    const Embedding q{static_cast<float>(qi) * 0.25f};
    for (int b = 0; b <= 20; ++b) {
      for (int g = 0; g <= 20; ++g) {
        const auto adapted = adapt_query(q, pos_vecs, neg_vecs, b * 0.1, g * 0.1);
        ++checked;
        satisfied += ranking_satisfied(adapted, store, positives, negatives, Metric::kEuclidean) ? 1 : 0;
      }
    }
  }
  const Embedding probe{1.6f};
  const bool probe_false = !ranking_satisfied(probe, store, positives, negatives, Metric::kEuclidean);
  return {satisfied == 0 && probe_false,
          fmt("%zu adapted queries over a 41-start x 21x21 beta,gamma grid, %zu satisfied; q=1.6 -> %s",
              checked, satisfied, probe_false ? "false" : "true")};
}

Outcome lazy_eager() {
  std::mt19937_64 rng(10010);
  constexpr std::size_t kStreams = 50;
  std::size_t ok = 0, queries = 0, lazily_skipped = 0;
  for (std::size_t s = 0; s < kStreams; ++s) {
    const std::size_t n = pick(rng, 2, 200), dim = pick(rng, 2, 8), m = pick(rng, 1, 3);
    const auto raw = oracle::random_store(rng, n, dim);
    auto ps_lazy = parameterize_store(raw, s, m);
    auto ps_eager = ps_lazy;
    VectorStore lazy = materialized_store(raw, ps_lazy);
    VectorStore eager = lazy;
    PendingUpdates pending_lazy;
    bool good = true;
    for (std::size_t step = 0; step < 12; ++step) {
      // A feedback round proposes new weights for a few items.
      PendingUpdates fresh;
      for (std::size_t u = pick(rng, 0, 6); u > 0; --u) {
        const ItemId id = pick(rng, 0, n - 1);
        std::vector<double> w(m);
        for (auto& x : w) x = uniform(rng, -1.5, 2.5);
        fresh.add({id, w, step + 1});
        pending_lazy.add({id, w, step + 1});
      }
      materialize_all(eager, ps_eager, fresh);
      // Then a query arrives.
      const auto q = oracle::random_vector(rng, dim);
      const std::size_t k = pick(rng, 1, n);
      const Metric metric = step % 3 == 2 ? Metric::kCosine : Metric::kEuclidean;
      materialize_if_affecting(lazy, ps_lazy, pending_lazy, q, k, metric);
      lazily_skipped += pending_lazy.size();
      good = good && exact_topk(lazy, q, k, metric) == exact_topk(eager, q, k, metric);
      ++queries;
    }
    ok += good ? 1 : 0;
  }
  return {ok == kStreams, fmt("%zu/%zu streams identical (%zu queries, %zu update-queries left pending)",
                              ok, kStreams, queries, lazily_skipped)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(11011);
  constexpr std::size_t kInstances = 100;
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::size_t t = 0; t < kInstances; ++t) {
    const std::size_t n = pick(rng, 6, 30), dim = pick(rng, 2, 8), m = pick(rng, 1, 3);
    const auto store = oracle::random_store(rng, n, dim);
    const auto ps = parameterize_store(store, t, m);
    const auto q = oracle::random_vector(rng, dim);
    std::vector<ItemId> pos, neg;
    std::vector<ItemId> ids = store.ids();
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t np = pick(rng, 1, 3), nn = pick(rng, 1, 3);
    pos.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(np));
    neg.assign(ids.begin() + static_cast<std::ptrdiff_t>(np), ids.begin() + static_cast<std::ptrdiff_t>(np + nn));
    // A large margin keeps every pair inside the hinge's linear region.
    const double margin = t % 2 == 0 ? 100.0 : kDefaultRankMargin;
    PairwiseHingeObjective obj(ps, pos, neg, q, margin);
    auto x = obj.initial_point();
    for (auto& v : x) v += uniform(rng, -0.5, 0.5);
    const auto g = obj.gradient(x);
    std::vector<double> fd(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      fd[i] = (obj.loss(xp) - obj.loss(xm)) / (2.0 * h);
    }
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      diff += (g[i] - fd[i]) * (g[i] - fd[i]);
      scale = std::max({scale, std::abs(g[i]), std::abs(fd[i])});
    }
    const double rel = scale == 0.0 ? 0.0 : std::sqrt(diff) / (scale * std::sqrt(static_cast<double>(x.size())));
    worst = std::max(worst, rel);
    ok += rel < 1e-4 ? 1 : 0;
  }
  return {ok == kInstances, fmt("%zu/%zu instances, worst relative error %.2e (limit 1e-4)", ok, kInstances, worst)};
}

Outcome planner_equivalence() {
  std::mt19937_64 rng(12012);
  constexpr std::size_t kSearches = 500;
  std::size_t equal = 0, monotone = 0;
  for (std::size_t t = 0; t < kSearches; ++t) {
    const std::size_t n = pick(rng, 10, 300), dim = pick(rng, 1, 6), k = pick(rng, 1, 12);
    const auto store = synthetic::filtered_store(t, n, dim, pick(rng, 1, 12));
    const auto q = oracle::random_vector(rng, dim);
    PredicateList preds;
    const auto shape = pick(rng, 0, 3);
    if (shape != 3) preds.push_back(Predicate::equals("group", static_cast<std::int64_t>(pick(rng, 0, 4))));
    if (shape >= 1) preds.push_back(Predicate::range("score", uniform(rng, 0, 0.5), uniform(rng, 0.5, 1.0)));
    if (shape >= 2) {
      const double threshold = uniform(rng, -1.0, 1.0);
      preds.push_back(Predicate::make_udf(
          "above", [threshold](ItemId, EmbeddingView x, const Metadata&) { return x[0] > threshold; },
          uniform(rng, 1, 500), 0.5));
    }
    calibrate_selectivity(store, preds);
    const auto pre = execute_prefilter(store, q, k, preds, Metric::kEuclidean);
    UdfCache cache(store.version());
    const auto post = execute_postfilter(store, q, k, 1.0 + uniform(rng, 0.01, 4.0), preds, Metric::kEuclidean, &cache);
    bool same = pre.hits == post.hits && cache.evaluations() <= store.size() && cache.evaluations() <= post.fetched;
    equal += same ? 1 : 0;
    double last = -1.0;
    bool mono = true;
    for (double a = 1.0; a <= 2.0 * static_cast<double>(n); a *= 1.3) {
      const double r = recall_at_alpha(store, q, k, a, preds);
      mono = mono && r >= last && r >= 0.0 && r <= 1.0;
      last = r;
    }
    mono = mono && last == 1.0;
    monotone += mono ? 1 : 0;
  }
  const auto c = synthetic::two_escalation_case();
  UdfCache cache(c.store.version());
  const auto post = execute_postfilter(c.store, c.query, c.k, c.alpha, c.predicates, Metric::kEuclidean, &cache);
  const auto pre = execute_prefilter(c.store, c.query, c.k, c.predicates, Metric::kEuclidean);
  const bool planted_ok = post.escalations == 2 && post.hits == pre.hits && cache.evaluations() < c.store.size();
  return {equal == kSearches && monotone == kSearches && planted_ok,
          fmt("%zu/%zu searches PostFilter==PreFilter, %zu/%zu recall curves monotone; planted case: "
              "%zu escalations, %zu UDF evaluations < store size %zu",
              equal, kSearches, monotone, kSearches, post.escalations, cache.evaluations(), c.store.size())};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"lambda0_reduction", 60, lambda_zero_reduction},
      {"greedy_optimality", 60, greedy_optimality},
      {"skewed_cluster_purity", 120, cluster_purity_gain},
      {"retrieval_protocol_fidelity", 60, table_protocol},
      {"global_separation", 60, svm_separation},
      {"corner_query_projection", 120, corner_query},
      {"multibody_oracle_equivalence", 180, multibody_oracle},
      {"hungarian_correctness", 60, hungarian},
      {"feedback_infeasibility", 60, feedback_infeasibility},
      {"lazy_eager_equivalence", 60, lazy_eager},
      {"weight_gradient_check", 60, gradient_check},
      {"planner_equivalence", 60, planner_equivalence},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = out.pass && secs < c.limit_s;
    failed += pass ? 0 : 1;
    std::printf("%s %s: %s [%.2fs, limit %.0fs]\n", pass ? "PASS" : "FAIL", c.name.c_str(), out.detail.c_str(),
                secs, c.limit_s);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed;
}
