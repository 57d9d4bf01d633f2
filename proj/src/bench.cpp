#include "simsearch/bench.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <random>

#include "simsearch/local_search.hpp"
#include "simsearch/multibody.hpp"
#include "simsearch/planner.hpp"
#include "simsearch/subsequence.hpp"
#include "simsearch/synthetic.hpp"

namespace simsearch::bench {

using nlohmann::json;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

double max_pairwise_overlap(const std::vector<WindowHit>& hits) {
  double worst = 0.0;
  for (std::size_t i = 0; i < hits.size(); ++i)
    for (std::size_t j = i + 1; j < hits.size(); ++j)
      worst = std::max(worst, overlap_ratio(hits[i].interval(), hits[j].interval()));
  return worst;
}

json score_json(const RetrievalScore& s, const std::vector<WindowHit>& kept) {
  return {{"f1", s.f1},          {"precision", s.precision},   {"recall", s.recall},
          {"overlap_ratio", s.overlap_ratio}, {"kept", kept.size()},
          {"max_pairwise_overlap", max_pairwise_overlap(kept)}};
}

}  // namespace

json run_subseq(const BenchOptions& opt) {
  Stopwatch clock;
  synthetic::TaskLogParams params;
  params.instances_per_task.assign(opt.tasks, opt.instances);
  const auto log = synthetic::planted_task_log(opt.seed, params);
  json planted = json::array();
  for (std::size_t t = 0; t < opt.tasks; ++t) {
    const auto& truth = log.instances[t];
    json task{{"task", t}, {"ground_truth", truth.size()}};
    for (auto [name, mode] : {std::pair{"classic", RetrievalMode::kClassic}, std::pair{"local", RetrievalMode::kLocal}}) {
      const auto kept = retrieve_task_instances(log.series, log.templates[t], truth.size(), mode);
      task[name] = score_json(evaluate_retrieval(kept, truth), kept);
    }
    planted.push_back(std::move(task));
  }

  double sum_classic = 0.0, sum_local = 0.0;
  std::size_t local_not_worse = 0;
  json per_seed = json::array();
  for (std::size_t r = 0; r < opt.runs; ++r) {
    const auto seed = opt.seed + r;
    const auto skewed = synthetic::skewed_task_log(seed);
    const auto& truth = skewed.instances[0];
    const auto c = retrieve_task_instances(skewed.series, skewed.templates[0], truth.size(), RetrievalMode::kClassic);
    const auto l = retrieve_task_instances(skewed.series, skewed.templates[0], truth.size(), RetrievalMode::kLocal);
    const double fc = evaluate_retrieval(c, truth).f1, fl = evaluate_retrieval(l, truth).f1;
    sum_classic += fc;
    sum_local += fl;
    local_not_worse += fl >= fc ? 1 : 0;
    per_seed.push_back({{"seed", seed}, {"classic_f1", fc}, {"local_f1", fl}});
  }
  const double n = static_cast<double>(std::max<std::size_t>(opt.runs, 1));
  return {{"planted", {{"seed", opt.seed}, {"series_length", log.series.size()}, {"tasks", std::move(planted)}}},
          {"skewed",
           {{"runs", opt.runs}, {"lambda", 0.9}, {"mean_f1_classic", sum_classic / n},
            {"mean_f1_local", sum_local / n}, {"local_not_worse", local_not_worse},
            {"per_seed", std::move(per_seed)}}},
          {"seconds", clock.seconds()}};
}

json run_clusters(const BenchOptions& opt) {
  Stopwatch clock;
  json per_seed = json::array();
  double sum_delta = 0.0;
  std::size_t wins = 0;
  for (std::size_t r = 0; r < opt.runs; ++r) {
    const auto seed = opt.seed + r;
    const auto d = synthetic::two_clusters(seed);
    LocalSearchParams p;
    p.k = 50;
    p.lambda = 0.9;
    const double classic = cluster_purity(exact_topk(d.store, d.query, p.k), d.store, d.query_class);
    const double local = cluster_purity(iterative_topk(d.store, d.query, p), d.store, d.query_class);
    sum_delta += local - classic;
    wins += local > classic ? 1 : 0;
    per_seed.push_back({{"seed", seed}, {"purity_classic", classic}, {"purity_local", local},
                        {"delta", local - classic}});
  }
  return {{"runs", opt.runs},
          {"k", 50},
          {"lambda", 0.9},
          {"mean_delta", sum_delta / static_cast<double>(std::max<std::size_t>(opt.runs, 1))},
          {"local_wins", wins},
          {"per_seed", std::move(per_seed)},
          {"seconds", clock.seconds()}};
}

json run_multibody(const BenchOptions& opt) {
  Stopwatch clock;
  const std::size_t instances = opt.runs * 5;
  std::size_t feasible = 0, per_object_ok = 0, constraint_first_ok = 0, assignment_cases = 0, assignment_ok = 0;
  std::size_t tuples_brute = 0, tuples_per_object = 0, tuples_constraint_first = 0;
  auto same = [](const std::optional<Alignment>& a, const std::optional<Alignment>& b) {
    return a.has_value() == b.has_value() && (!a || a->score == b->score);
  };
  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = synthetic::random_multibody(opt.seed + i);
    MultibodyStats sb, sp, sc;
    const auto oracle = brute_force_best(inst.objects, inst.query, inst.constraints, Metric::kEuclidean, &sb);
    const auto po = strategy_per_object(inst.objects, inst.query, inst.constraints, kDefaultPerObjectK0,
                                        Metric::kEuclidean, &sp);
    const auto cf = strategy_constraint_first(inst.objects, inst.query, inst.constraints, Metric::kEuclidean, &sc);
    feasible += oracle ? 1 : 0;
    per_object_ok += same(oracle, po) ? 1 : 0;
    constraint_first_ok += same(oracle, cf) ? 1 : 0;
    tuples_brute += sb.tuples_evaluated;
    tuples_per_object += sp.tuples_evaluated;
    tuples_constraint_first += sc.tuples_evaluated;
    if (eligibility_only(inst.constraints)) {
      ++assignment_cases;
      assignment_ok += same(oracle, assignment_best(inst.objects, inst.query, inst.constraints)) ? 1 : 0;
    }
  }

  // Warm start over sliding windows of slowly moving tracks.
  const auto tracks = synthetic::slow_trajectories(opt.seed, 12, 80);
  constexpr std::size_t kWindow = 8;
  const auto first = window_objects(tracks, 0, kWindow);
  MultiQuery query;
  for (std::size_t i : {std::size_t{0}, std::size_t{5}}) query.objects.push_back({"obj", first[i].embedding});
  const ConstraintSet constraints{SameScene{}};
  std::size_t windows = 0, reused = 0, warm_ok = 0;
  auto prev = strategy_per_object(first, query, constraints, kDefaultPerObjectK0);
  for (std::int64_t start = 1; start + static_cast<std::int64_t>(kWindow) <= 80 && prev; ++start) {
    const auto objs = window_objects(tracks, start, kWindow);
    const auto ws = warm_start_window(*prev, 1, objs, query, constraints);
    const auto oracle = brute_force_best(objs, query, constraints);
    ++windows;
    reused += ws.reused ? 1 : 0;
    warm_ok += same(ws.alignment, oracle) ? 1 : 0;
    prev = ws.alignment;
  }

  return {{"instances", instances},
          {"feasible", feasible},
          {"per_object_matches_oracle", per_object_ok},
          {"constraint_first_matches_oracle", constraint_first_ok},
          {"assignment_cases", assignment_cases},
          {"assignment_matches_oracle", assignment_ok},
          {"tuples_evaluated", {{"brute_force", tuples_brute}, {"per_object", tuples_per_object},
                                {"constraint_first", tuples_constraint_first}}},
          {"count_alignments_4_2", count_alignments(4, 2)},
          {"warm_start", {{"windows", windows}, {"reused", reused}, {"matches_oracle", warm_ok}}},
          {"seconds", clock.seconds()}};
}

json run_planner(const BenchOptions& opt) {
  Stopwatch clock;
  const std::size_t searches = opt.runs * 5;
  std::size_t equal = 0, monotone = 0;
  std::map<std::string, std::size_t> plan_counts;
  for (std::size_t i = 0; i < searches; ++i) {
    std::mt19937_64 rng(opt.seed + i);
    const std::size_t n = 50 + rng() % 250;
    const auto store = synthetic::filtered_store(opt.seed + i, n, 4);
    Embedding q(4);
    for (auto& v : q) v = static_cast<float>(std::normal_distribution<double>()(rng));
    const std::size_t k = 1 + rng() % 10;
    PredicateList preds;
    preds.push_back(Predicate::equals("group", static_cast<std::int64_t>(rng() % 10)));
    if (rng() % 2) preds.push_back(Predicate::range("score", 0.2, 0.9));
    if (rng() % 2) {
      preds.push_back(parse_udf_predicate("threshold@0@" + std::to_string(static_cast<double>(rng() % 3) - 1.0) + ":50:0.5"));
    }
    calibrate_selectivity(store, preds);
    const auto pre = execute_prefilter(store, q, k, preds, Metric::kEuclidean);
    const double alpha = 1.5 + static_cast<double>(rng() % 4);
    UdfCache cache(store.version());
    const auto post = execute_postfilter(store, q, k, alpha, preds, Metric::kEuclidean, &cache);
    equal += ids_of(pre.hits) == ids_of(post.hits) ? 1 : 0;
    double last = -1.0;
    bool mono = true;
    for (double a : {1.25, 2.0, 4.0, 8.0, 16.0, 64.0, 1e6}) {
      const double r = recall_at_alpha(store, q, k, a, preds);
      mono = mono && r >= last;
      last = r;
    }
    monotone += mono ? 1 : 0;
    ++plan_counts[std::string(to_string(plan_query(store.size(), k, preds).kind))];
  }

  const auto c = synthetic::two_escalation_case();
  UdfCache cache(c.store.version());
  const auto post = execute_postfilter(c.store, c.query, c.k, c.alpha, c.predicates, Metric::kEuclidean, &cache);
  const auto pre = execute_prefilter(c.store, c.query, c.k, c.predicates, Metric::kEuclidean);

  return {{"searches", searches},
          {"postfilter_equals_prefilter", equal},
          {"recall_monotone", monotone},
          {"plans_chosen", plan_counts},
          {"planted_two_escalation",
           {{"escalations", post.escalations}, {"udf_evaluations", cache.evaluations()},
            {"store_size", c.store.size()}, {"equals_prefilter", ids_of(pre.hits) == ids_of(post.hits)}}},
          {"seconds", clock.seconds()}};
}

json run(std::string_view kind, const BenchOptions& opt) {
  json out;
  if (kind == "subseq") out = run_subseq(opt);
  else if (kind == "clusters") out = run_clusters(opt);
  else if (kind == "multibody") out = run_multibody(opt);
  else if (kind == "planner") out = run_planner(opt);
  else throw InvalidArgument("unknown bench '" + std::string(kind) + "' (subseq, clusters, multibody, planner)");
  return {{"bench", kind}, {"seed", opt.seed}, {"runs", opt.runs}, {"results", std::move(out)}};
}

}  // namespace simsearch::bench
