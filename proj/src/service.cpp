#include "simsearch/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <set>

#include <httplib.h>

#include "simsearch/feedback.hpp"
#include "simsearch/global_search.hpp"
#include "simsearch/local_search.hpp"
#include "simsearch/multibody_io.hpp"
#include "simsearch/planner.hpp"
#include "simsearch/projection.hpp"
#include "simsearch/store_io.hpp"
#include "simsearch/synthetic.hpp"

namespace simsearch::service {

using nlohmann::json;
namespace fs = std::filesystem;

struct HttpError : std::runtime_error {
  HttpError(int s, const std::string& msg) : std::runtime_error(msg), status(s) {}
  int status;
};

struct Dataset {
  std::string name;
  std::unique_ptr<VersionedStore> store;
  std::shared_ptr<const std::vector<SceneObject>> scenes;
  mutable UdfCache udf_cache;

  std::shared_ptr<const VectorStore> snapshot() const {
    if (!store) throw HttpError(400, "dataset '" + name + "' has no vectors");
    return store->snapshot();
  }
};

namespace {

template <typename T>
T opt(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("field \"") + key + "\": " + e.what());
  }
}

template <typename T>
T need(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null())
    throw InvalidArgument(std::string("missing field \"") + key + "\"");
  return opt<T>(j, key, T{});
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

// Everything a single-vector search needs, resolved against a store.
struct SearchSpec {
  std::string mode = "classic";
  std::size_t k = 10;
  Embedding query;
  std::optional<ItemId> query_id;
  Metric metric = Metric::kEuclidean;
  double lambda = 0.9;
  std::size_t batch = 1;
  double reg_c = 1.0;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  std::size_t coreset_size = 0;
  CoresetMethod coreset_method = CoresetMethod::kKCenterGreedy;
  bool standardize = false;
  std::vector<ItemId> positive_ids;
  PredicateList predicates;
  std::optional<double> alpha;
  std::string plan = "auto";
  json filters_json;  // echoed into session records
};

PredicateList predicates_from_json(const json& req) {
  PredicateList out;
  if (req.contains("filter") && !req.at("filter").is_null()) {
    const auto& f = req.at("filter");
    if (f.is_string()) {
      out = parse_filter(f.get<std::string>());
    } else if (f.is_array()) {
      for (const auto& p : f) {
        const auto key = need<std::string>(p, "key");
        if (p.contains("eq")) {
          out.push_back(Predicate::equals(key, meta_value_from_json(p.at("eq"))));
        } else {
          std::optional<double> lo, hi;
          if (p.contains("min")) lo = p.at("min").get<double>();
          if (p.contains("max")) hi = p.at("max").get<double>();
          if (!lo && !hi) throw InvalidArgument("filter on '" + key + "' needs eq, min or max");
          out.push_back(Predicate::range(key, lo, hi));
        }
        out.back().validate();
      }
    } else {
      throw InvalidArgument("\"filter\" must be a string expression or an array");
    }
  }
  if (req.contains("udfs") && !req.at("udfs").is_null()) {
    for (const auto& u : req.at("udfs")) {
      if (!u.is_string()) throw InvalidArgument("\"udfs\" entries must be strings name:cost:sel");
      out.push_back(parse_udf_predicate(u.get<std::string>()));
    }
  }
  return out;
}

// Applies the fields present in `req` on top of `spec`.
void merge_search(SearchSpec& spec, const json& req, const VectorStore* store) {
  spec.mode = opt<std::string>(req, "mode", spec.mode);
  if (spec.mode != "classic" && spec.mode != "local" && spec.mode != "global" && spec.mode != "multibody")
    throw InvalidArgument("unknown mode '" + spec.mode + "'");
  if (req.contains("k")) {
    const auto k = opt<std::int64_t>(req, "k", 0);
    if (k < 1) throw InvalidArgument("k must be at least 1");
    spec.k = static_cast<std::size_t>(k);
  }
  if (req.contains("metric")) spec.metric = parse_metric(need<std::string>(req, "metric"));
  spec.lambda = opt<double>(req, "lambda", spec.lambda);
  spec.batch = opt<std::size_t>(req, "batch", spec.batch);
  spec.reg_c = opt<double>(req, "reg_c", spec.reg_c);
  spec.epochs = opt<std::size_t>(req, "epochs", spec.epochs);
  spec.seed = opt<std::uint64_t>(req, "seed", spec.seed);
  spec.coreset_size = opt<std::size_t>(req, "coreset_size", spec.coreset_size);
  if (req.contains("coreset_method"))
    spec.coreset_method = parse_coreset_method(need<std::string>(req, "coreset_method"));
  spec.standardize = opt<bool>(req, "standardize", spec.standardize);
  spec.positive_ids = opt<std::vector<ItemId>>(req, "positive_ids", spec.positive_ids);
  if (req.contains("filter") || req.contains("udfs")) {
    spec.predicates = predicates_from_json(req);
    spec.filters_json = json{{"filter", req.value("filter", json())}, {"udfs", req.value("udfs", json())}};
  }
  if (req.contains("alpha")) spec.alpha = need<double>(req, "alpha");
  spec.plan = opt<std::string>(req, "plan", spec.plan);
  if (spec.plan != "auto" && spec.plan != "prefilter" && spec.plan != "postfilter")
    throw InvalidArgument("plan must be auto, prefilter or postfilter");

  if (req.contains("query_id") && !req.at("query_id").is_null()) {
    spec.query_id = need<ItemId>(req, "query_id");
    if (!store) throw InvalidArgument("query_id needs a vector dataset");
    if (!store->contains(*spec.query_id))
      throw HttpError(404, "query_id " + std::to_string(*spec.query_id) + " not in dataset");
    const auto e = store->embedding(*spec.query_id);
    spec.query.assign(e.begin(), e.end());
  } else if (req.contains("query") && req.at("query").is_array()) {
    spec.query = need<Embedding>(req, "query");
    spec.query_id.reset();
  }
  if (store) {
    for (ItemId id : spec.positive_ids)
      if (!store->contains(id)) throw HttpError(404, "positive id " + std::to_string(id) + " not in dataset");
  }
}

json hit_json(const VectorStore& store, const RankedHit& h) {
  const std::size_t row = store.require_row(h.id);
  json out{{"id", h.id}, {"score", h.score}, {"metadata", metadata_to_json(store.metadata_at(row))}};
  out["class"] = store.label_at(row) ? json(*store.label_at(row)) : json(nullptr);
  return out;
}

VectorStore subset(const VectorStore& store, const std::vector<std::size_t>& rows) {
  VectorStore out(store.dim(), store.metric());
  out.set_version(store.version());
  for (std::size_t r : rows) out.insert(store.item_at(r));
  return out;
}

struct SingleResult {
  std::vector<RankedHit> hits;
  json plan;
};

std::vector<RankedHit> run_mode(const VectorStore& store, const SearchSpec& spec) {
  if (spec.k > store.size())
    throw InvalidArgument("k=" + std::to_string(spec.k) + " exceeds the " + std::to_string(store.size()) +
                          " searchable items");
  if (spec.mode == "classic") return exact_topk(store, spec.query, spec.k, spec.metric);
  if (spec.mode == "local") {
    LocalSearchParams p;
    p.k = spec.k;
    p.lambda = spec.lambda;
    p.batch_size = spec.batch;
    p.metric = spec.metric;
    return iterative_topk(store, spec.query, p);
  }
  // global
  SvmParams p;
  p.reg_c = spec.reg_c;
  p.epochs = spec.epochs;
  p.seed = spec.seed;
  p.standardize = spec.standardize;
  std::vector<Embedding> positives{spec.query};
  std::set<ItemId> excluded(spec.positive_ids.begin(), spec.positive_ids.end());
  if (spec.query_id) excluded.insert(*spec.query_id);
  for (ItemId id : spec.positive_ids) {
    if (!store.contains(id)) continue;
    const auto e = store.embedding(id);
    positives.emplace_back(e.begin(), e.end());
  }
  std::vector<ItemId> negatives;
  if (spec.coreset_size > 0) {
    CoresetSpec cs{std::min(spec.coreset_size, store.size()), spec.coreset_method, spec.seed};
    negatives = build_coreset(store, cs);
  } else {
    negatives = store.ids();
  }
  std::erase_if(negatives, [&](ItemId id) { return excluded.count(id) > 0; });
  if (negatives.empty()) throw InvalidArgument("global search needs at least one negative item");
  const auto sep = train_separator(store, negatives, positives, p);
  return rank_by_hyperplane(store, sep, spec.k);
}

SingleResult run_single(const VectorStore& store, const SearchSpec& spec, UdfCache* cache) {
  if (spec.query.empty()) throw InvalidArgument("missing \"query\" or \"query_id\"");
  if (spec.query.size() != store.dim()) throw DimensionMismatch(store.dim(), spec.query.size());
  SingleResult r;
  if (spec.predicates.empty()) {
    r.hits = run_mode(store, spec);
    r.plan = {{"kind", "full_scan"}};
  } else if (spec.mode == "classic") {
    PredicateList preds = spec.predicates;
    calibrate_selectivity(store, preds);
    PlanSpec plan = plan_query(store.size(), spec.k, preds);
    if (spec.plan == "prefilter") plan.kind = PlanKind::kPreFilter;
    if (spec.plan == "postfilter" || spec.alpha) plan.kind = PlanKind::kPostFilter;
    if (spec.alpha) plan.alpha = *spec.alpha;
    if (plan.kind == PlanKind::kPostFilter && !(plan.alpha > 1.0))
      plan.alpha = default_alpha(store.size(), spec.k, plan.selectivity);
    const auto result = execute_plan(plan, store, spec.query, spec.k, preds, spec.metric, cache);
    r.hits = result.hits;
    r.plan = {{"kind", to_string(plan.kind)},   {"estimated_cost", plan.estimated_cost},
              {"selectivity", plan.selectivity}, {"short", result.short_result},
              {"fetched", result.fetched},       {"escalations", result.escalations},
              {"udf_evaluations", cache ? cache->evaluations() : 0}};
    if (plan.kind == PlanKind::kPostFilter) {
      r.plan["alpha"] = plan.alpha;
      r.plan["final_alpha"] = result.final_alpha;
    }
  } else {
    // Distribution-aware modes run on the filtered subset.
    std::vector<std::size_t> rows;
    for (std::size_t row = 0; row < store.size(); ++row)
      if (passes(store, row, spec.predicates, cache)) rows.push_back(row);
    const VectorStore filtered = subset(store, rows);
    if (filtered.empty()) {
      r.plan = {{"kind", "prefilter"}, {"short", true}};
      return r;
    }
    SearchSpec narrowed = spec;
    narrowed.k = std::min(spec.k, filtered.size());
    r.hits = run_mode(filtered, narrowed);
    r.plan = {{"kind", "prefilter"}, {"short", filtered.size() < spec.k}};
  }
  std::sort(r.hits.begin(), r.hits.end(), hit_before);
  return r;
}

json hits_json(const VectorStore& store, const std::vector<RankedHit>& hits) {
  json out = json::array();
  for (const auto& h : hits) out.push_back(hit_json(store, h));
  return out;
}

json multibody_search(const Dataset& ds, const json& req) {
  if (!ds.scenes) throw InvalidArgument("dataset '" + ds.name + "' has no scenes for multibody search");
  const json& qj = req.contains("multi_query") ? req.at("multi_query") : req.at("query");
  const MultiQuery query = multi_query_from_json(qj);
  const ConstraintSet constraints = constraints_from_json(req.value("constraints", json::array()));
  validate_constraints(constraints, query.size());
  const Metric metric = req.contains("metric") ? parse_metric(req.at("metric").get<std::string>()) : Metric::kEuclidean;
  const auto strategy = opt<std::string>(req, "strategy", "auto");
  const auto k0 = opt<std::size_t>(req, "k0", kDefaultPerObjectK0);
  const auto& objects = *ds.scenes;

  MultibodyStats stats;
  std::optional<Alignment> best;
  std::string plan;
  if (strategy == "auto") {
    const PlanSpec p = plan_multibody(constraints);
    plan = std::string(to_string(p.kind));
    best = p.kind == PlanKind::kConstraintFirst
               ? strategy_constraint_first(objects, query, constraints, metric, &stats)
               : strategy_per_object(objects, query, constraints, k0, metric, &stats);
  } else if (strategy == "per_object") {
    plan = "per_object_join";
    best = strategy_per_object(objects, query, constraints, k0, metric, &stats);
  } else if (strategy == "constraint_first") {
    plan = "constraint_first";
    best = strategy_constraint_first(objects, query, constraints, metric, &stats);
    if (stats.fell_back) plan = "per_object_join";
  } else if (strategy == "brute_force") {
    plan = "full_scan";
    best = brute_force_best(objects, query, constraints, metric, &stats);
  } else {
    throw InvalidArgument("unknown multibody strategy '" + strategy + "'");
  }
  return {{"alignment", alignment_to_json(best)},
          {"plan_used", plan},
          {"hits", json::array()},
          {"stats",
           {{"tuples_evaluated", stats.tuples_evaluated},
            {"candidate_pairs", stats.candidate_pairs},
            {"rounds", stats.rounds},
            {"final_k", stats.final_k},
            {"fell_back", stats.fell_back}}}};
}

fs::path resolve_path(const fs::path& root, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !root.empty()) path = root / path;
  return path;
}

}  // namespace

struct Round {
  std::size_t round = 0;
  std::string strategy;
  json labels;
  Embedding query;
  std::vector<RankedHit> hits;
};

struct Session {
  std::mutex mu;
  std::string id;
  std::string dataset;
  std::shared_ptr<const Dataset> ds;
  std::shared_ptr<const VectorStore> snapshot;
  SearchSpec spec;
  std::uint64_t param_seed = 0;
  std::size_t components = 2;
  std::optional<ParameterizedStore> ps;
  PendingUpdates pending;
  std::optional<VectorStore> working;
  std::vector<Round> rounds;

  const VectorStore& current() const { return working ? *working : *snapshot; }
};

Service::Service(fs::path store_root) : store_root_(std::move(store_root)) {
  if (store_root_.empty() || !fs::is_directory(store_root_)) return;
  for (const auto& entry : fs::directory_iterator(store_root_)) {
    if (!entry.is_directory() || !fs::exists(store_vset_path(entry.path()))) continue;
    std::optional<std::vector<SceneObject>> scenes;
    if (fs::exists(entry.path() / "scenes.json")) scenes = read_scenes(entry.path() / "scenes.json");
    add_dataset(entry.path().filename().string(), load_store_dir(entry.path()), std::move(scenes));
  }
}

Service::~Service() = default;

std::uint64_t Service::add_dataset(const std::string& name, VectorStore store,
                                   std::optional<std::vector<SceneObject>> scenes) {
  if (name.empty() || name.find('/') != std::string::npos)
    throw InvalidArgument("dataset names must be non-empty and contain no '/'");
  std::unique_lock lock(datasets_mu_);
  auto& slot = datasets_[name];
  auto next = std::make_shared<Dataset>();
  next->name = name;
  std::uint64_t version = store.version();
  if (slot && slot->store) {
    next->store = std::make_unique<VersionedStore>(*slot->store->snapshot());
    version = next->store->publish(std::move(store))->version();
  } else {
    next->store = std::make_unique<VersionedStore>(std::move(store));
    version = next->store->version();
  }
  if (scenes) next->scenes = std::make_shared<const std::vector<SceneObject>>(std::move(*scenes));
  else if (slot) next->scenes = slot->scenes;
  slot = std::move(next);
  return version;
}

std::shared_ptr<Dataset> Service::find_dataset(const std::string& name) const {
  std::shared_lock lock(datasets_mu_);
  auto it = datasets_.find(name);
  if (it == datasets_.end()) throw HttpError(404, "unknown dataset '" + name + "'");
  return it->second;
}

std::shared_ptr<Session> Service::find_session(const std::string& id) const {
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw HttpError(404, "unknown session '" + id + "'");
  return it->second;
}

Response Service::list_datasets() const {
  std::shared_lock lock(datasets_mu_);
  json out = json::array();
  for (const auto& [name, ds] : datasets_) {
    const auto snap = ds->store->snapshot();
    out.push_back({{"name", name},
                   {"count", snap->size()},
                   {"dim", snap->dim()},
                   {"version", snap->version()},
                   {"scene_objects", ds->scenes ? ds->scenes->size() : 0}});
  }
  return {200, {{"datasets", std::move(out)}}};
}

Response Service::ingest(const json& req) {
  const auto name = need<std::string>(req, "name");
  VectorStore store(1);
  if (req.contains("synthetic")) {
    const auto& s = req.at("synthetic");
    const auto kind = opt<std::string>(s, "kind", "blobs");
    if (kind != "blobs") throw InvalidArgument("unknown synthetic kind '" + kind + "'");
    store = synthetic::blobs(opt<std::uint64_t>(s, "seed", 0), opt<std::size_t>(s, "n", 1000),
                             opt<std::size_t>(s, "dim", 8), opt<std::size_t>(s, "clusters", 4),
                             opt<double>(s, "spread", 1.0), opt<double>(s, "sigma", 0.3));
  } else if (req.contains("store")) {
    store = load_store_dir(resolve_path(store_root_, need<std::string>(req, "store")));
  } else {
    const auto vset = resolve_path(store_root_, need<std::string>(req, "vset_path"));
    std::optional<fs::path> meta;
    if (req.contains("meta_path") && !req.at("meta_path").is_null())
      meta = resolve_path(store_root_, need<std::string>(req, "meta_path"));
    store = load_store(vset, meta);
  }
  std::optional<std::vector<SceneObject>> scenes;
  if (req.contains("scenes_path") && !req.at("scenes_path").is_null())
    scenes = read_scenes(resolve_path(store_root_, need<std::string>(req, "scenes_path")));
  const std::size_t count = store.size(), dim = store.dim();
  const std::size_t objects = scenes ? scenes->size() : 0;
  const auto version = add_dataset(name, std::move(store), std::move(scenes));
  return {200, {{"name", name}, {"count", count}, {"dim", dim}, {"version", version}, {"scene_objects", objects}}};
}

Response Service::search(const json& req) const {
  const auto start = std::chrono::steady_clock::now();
  const auto ds = find_dataset(need<std::string>(req, "dataset"));
  if (opt<std::string>(req, "mode", "classic") == "multibody") {
    json out = multibody_search(*ds, req);
    out["timings"] = {{"total_ms", elapsed_ms(start)}};
    return {200, std::move(out)};
  }
  const auto snap = ds->snapshot();
  SearchSpec spec;
  spec.metric = snap->metric();
  merge_search(spec, req, snap.get());
  if (!req.contains("k")) throw InvalidArgument("missing field \"k\"");
  const auto result = run_single(*snap, spec, &ds->udf_cache);
  return {200,
          {{"hits", hits_json(*snap, result.hits)},
           {"plan_used", result.plan.at("kind")},
           {"plan", result.plan},
           {"mode", spec.mode},
           {"version", snap->version()},
           {"timings", {{"total_ms", elapsed_ms(start)}}}}};
}

Response Service::projection(const std::string& name, std::size_t dims) const {
  const auto snap = find_dataset(name)->snapshot();
  const auto p = pca_project(*snap, dims);
  json points = json::array();
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    const auto& label = snap->label_at(i);
    points.push_back({{"id", p.ids[i]}, {"coords", p.coords[i]}, {"class", label ? json(*label) : json(nullptr)}});
  }
  return {200,
          {{"dataset", name}, {"version", snap->version()}, {"dims", dims}, {"variances", p.variances},
           {"points", std::move(points)}}};
}

namespace {

json round_json(const Round& r) {
  return {{"round", r.round}, {"strategy", r.strategy}, {"labels", r.labels}, {"query", r.query},
          {"hit_ids", ids_of(r.hits)}};
}

}  // namespace

Response Service::create_session(const json& req) {
  auto s = std::make_shared<Session>();
  s->dataset = need<std::string>(req, "dataset");
  const auto ds = find_dataset(s->dataset);
  s->ds = ds;
  s->snapshot = ds->snapshot();
  s->spec.metric = s->snapshot->metric();
  merge_search(s->spec, req, s->snapshot.get());
  if (s->spec.mode == "multibody") throw InvalidArgument("sessions support classic, local and global modes");
  s->param_seed = opt<std::uint64_t>(req, "param_seed", 0);
  s->components = opt<std::size_t>(req, "components", 2);
  if (s->components == 0) throw InvalidArgument("components must be at least 1");

  json out{{"dataset", s->dataset}, {"version", s->snapshot->version()}, {"round", 0}};
  if (!s->spec.query.empty()) {
    const auto result = run_single(*s->snapshot, s->spec, &ds->udf_cache);
    s->rounds.push_back({0, "initial", json::array(), s->spec.query, result.hits});
    out["hits"] = hits_json(*s->snapshot, result.hits);
    out["plan_used"] = result.plan.at("kind");
  } else {
    out["hits"] = json::array();
  }
  {
    std::lock_guard lock(sessions_mu_);
    s->id = "s" + std::to_string(next_session_++);
    sessions_[s->id] = s;
  }
  out["session_id"] = s->id;
  return {200, std::move(out)};
}

Response Service::get_session(const std::string& id) const {
  const auto s = find_session(id);
  std::lock_guard lock(s->mu);
  json rounds = json::array();
  for (const auto& r : s->rounds) rounds.push_back(round_json(r));
  return {200,
          {{"session_id", s->id}, {"dataset", s->dataset}, {"version", s->snapshot->version()},
           {"mode", s->spec.mode}, {"k", s->spec.k}, {"query", s->spec.query},
           {"pending_updates", s->pending.size()}, {"rounds", std::move(rounds)}}};
}

Response Service::feedback(const std::string& id, const json& req) {
  const auto s = find_session(id);
  std::lock_guard lock(s->mu);
  const std::size_t round = s->rounds.empty() ? 1 : s->rounds.back().round + 1;

  // Optional search overrides (query, k, mode, ...) apply from this round on.
  merge_search(s->spec, req, &s->current());
  if (s->spec.mode == "multibody") throw InvalidArgument("sessions support classic, local and global modes");
  if (s->spec.query.empty()) throw InvalidArgument("session has no query; pass \"query\" or \"query_id\"");
  if (s->spec.query.size() != s->snapshot->dim()) throw DimensionMismatch(s->snapshot->dim(), s->spec.query.size());

  const auto strategy = opt<std::string>(req, "strategy", "query");
  if (strategy != "query" && strategy != "weights")
    throw InvalidArgument("strategy must be \"query\" or \"weights\"");
  const json params = req.value("params", json::object());

  std::vector<FeedbackLabel> labels;
  std::vector<ItemId> pos_ids, neg_ids;
  const json labels_json = req.value("labels", json::array());
  if (!labels_json.is_array()) throw InvalidArgument("\"labels\" must be an array");
  for (const auto& l : labels_json) {
    const auto item = need<ItemId>(l, "id");
    if (!s->snapshot->contains(item)) throw HttpError(404, "labelled id " + std::to_string(item) + " not in dataset");
    const std::string pol = l.contains("label") ? need<std::string>(l, "label") : need<std::string>(l, "polarity");
    const Polarity p = parse_polarity(pol);
    labels.push_back({item, p, round});
    (p == Polarity::kPositive ? pos_ids : neg_ids).push_back(item);
  }

  json out{{"session_id", s->id}, {"round", round}, {"strategy", strategy}};
  if (strategy == "query") {
    const VectorStore& store = s->current();
    std::vector<Embedding> pos, neg;
    for (ItemId i : pos_ids) pos.emplace_back(store.embedding(i).begin(), store.embedding(i).end());
    for (ItemId i : neg_ids) neg.emplace_back(store.embedding(i).begin(), store.embedding(i).end());
    if (!labels.empty()) {
      s->spec.query = adapt_query(s->spec.query, pos, neg, opt<double>(params, "beta", kDefaultBeta),
                                  opt<double>(params, "gamma", kDefaultGamma));
      s->spec.query_id.reset();
      out["new_query"] = s->spec.query;
    }
    out["ranking_satisfied"] = (pos_ids.empty() || neg_ids.empty())
                                   ? json(nullptr)
                                   : json(ranking_satisfied(s->spec.query, store, pos_ids, neg_ids, s->spec.metric));
  } else {
    if (!s->ps) {
      s->ps = parameterize_store(*s->snapshot, s->param_seed, s->components);
      s->working = materialized_store(*s->snapshot, *s->ps);
    }
    WeightFeedbackParams wp;
    wp.eta = opt<double>(params, "eta", wp.eta);
    wp.steps = opt<std::size_t>(params, "steps", wp.steps);
    wp.margin = opt<double>(params, "margin", wp.margin);
    wp.metric = s->spec.metric;
    wp.round = round;
    json errors = json::array();
    json loss = nullptr;
    if (!labels.empty()) {
      const auto adapted = adapt_weights(*s->ps, labels, s->spec.query, wp);
      for (const auto& u : adapted.updates) s->pending.add(u);
      for (const auto& [item, why] : adapted.errors) errors.push_back({{"id", item}, {"error", why}});
      loss = {{"initial", adapted.initial_loss}, {"final", adapted.final_loss}};
    }
    const auto applied =
        materialize_if_affecting(*s->working, *s->ps, s->pending, s->spec.query, s->spec.k, s->spec.metric);
    out["pending_updates"] = {{"remaining", s->pending.size()}, {"applied", applied}, {"errors", errors}};
    out["loss"] = loss;
    out["ranking_satisfied"] = (pos_ids.empty() || neg_ids.empty())
                                   ? json(nullptr)
                                   : json(ranking_satisfied(s->spec.query, *s->working, pos_ids, neg_ids, s->spec.metric));
  }

  const auto result = run_single(s->current(), s->spec, &s->ds->udf_cache);
  s->rounds.push_back({round, strategy, labels_json, s->spec.query, result.hits});
  out["hits"] = hits_json(s->current(), result.hits);
  out["plan_used"] = result.plan.at("kind");
  out["query"] = s->spec.query;
  return {200, std::move(out)};
}

namespace {

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos < path.size()) {
    const auto next = path.find('/', pos);
    const auto end = next == std::string_view::npos ? path.size() : next;
    if (end > pos) parts.emplace_back(path.substr(pos, end - pos));
    pos = end + 1;
  }
  return parts;
}

Response error(int status, const std::string& msg) { return {status, {{"error", msg}}}; }

}  // namespace

Response Service::handle(std::string_view method, std::string_view path, std::string_view body,
                         const std::map<std::string, std::string>& params) {
  try {
    const auto parts = split_path(path.substr(0, path.find('?')));
    auto parse_body = [&]() -> json {
      if (body.empty()) return json::object();
      json j = json::parse(body);
      if (!j.is_object()) throw InvalidArgument("request body must be a JSON object");
      return j;
    };
    if (method == "GET") {
      if (parts.size() == 1 && parts[0] == "health") return {200, {{"status", "ok"}}};
      if (parts.size() == 1 && parts[0] == "datasets") return list_datasets();
      if (parts.size() == 3 && parts[0] == "datasets" && parts[2] == "projection") {
        std::size_t dims = 2;
        if (auto it = params.find("dims"); it != params.end()) {
          try {
            dims = std::stoul(it->second);
          } catch (const std::exception&) {
            throw InvalidArgument("dims must be a positive integer");
          }
        }
        return projection(parts[1], dims);
      }
      if (parts.size() == 2 && parts[0] == "sessions") return get_session(parts[1]);
    } else if (method == "POST") {
      if (parts.size() == 1 && parts[0] == "datasets") return ingest(parse_body());
      if (parts.size() == 1 && parts[0] == "search") return search(parse_body());
      if (parts.size() == 1 && parts[0] == "sessions") return create_session(parse_body());
      if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "feedback")
        return feedback(parts[1], parse_body());
    }
    return error(404, "no route for " + std::string(method) + " " + std::string(path));
  } catch (const HttpError& e) {
    return error(e.status, e.what());
  } catch (const FormatError& e) {
    return error(e.code() == FormatErrorCode::kIo ? 404 : 422, e.what());
  } catch (const InvalidArgument& e) {
    return error(400, e.what());
  } catch (const json::exception& e) {
    return error(400, std::string("bad JSON: ") + e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

std::pair<std::string, int> resolve_bind(const std::string& default_host, int default_port) {
  const char* env = std::getenv("BIND_ADDR");
  if (!env || !*env) return {default_host, default_port};
  const std::string v(env);
  const auto colon = v.rfind(':');
  std::string host = default_host;
  std::string port = v;
  if (colon != std::string::npos) {
    if (colon > 0) host = v.substr(0, colon);
    port = v.substr(colon + 1);
  }
  try {
    const int p = std::stoi(port);
    if (p < 0 || p > 65535) throw std::out_of_range("port");
    return {host, p};
  } catch (const std::exception&) {
    throw InvalidArgument("BIND_ADDR must be host:port, :port or port");
  }
}

bool serve_http(Service& service, const std::string& host, int port) {
  httplib::Server server;
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  auto dispatch = [&service](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> params;
    for (const auto& [k, v] : req.params) params.emplace(k, v);
    const Response r = service.handle(req.method, req.path, req.body, params);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(".*", dispatch);
  server.Post(".*", dispatch);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  return server.listen(host, port);
}

}  // namespace simsearch::service
