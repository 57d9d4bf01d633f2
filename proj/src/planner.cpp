#include "simsearch/planner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <thread>

namespace simsearch {

Predicate Predicate::equals(std::string key, MetaValue value, double selectivity) {
  Predicate p;
  p.kind = Kind::kMetadataEquality;
  p.key = std::move(key);
  p.value = std::move(value);
  p.selectivity = selectivity;
  return p;
}

Predicate Predicate::range(std::string key, std::optional<double> lo, std::optional<double> hi,
                           double selectivity) {
  Predicate p;
  p.kind = Kind::kMetadataRange;
  p.key = std::move(key);
  p.lo = lo;
  p.hi = hi;
  p.selectivity = selectivity;
  return p;
}

Predicate Predicate::make_udf(std::string name, UdfFn fn, double cost_per_item, double selectivity) {
  Predicate p;
  p.kind = Kind::kUdf;
  p.udf_name = std::move(name);
  p.udf = std::move(fn);
  p.cost_per_item = cost_per_item;
  p.selectivity = selectivity;
  return p;
}

void Predicate::validate() const {
  if (!(selectivity > 0.0 && selectivity <= 1.0))
    throw InvalidArgument("predicate selectivity must lie in (0, 1]");
  if (!(cost_per_item >= 0.0) || !std::isfinite(cost_per_item))
    throw InvalidArgument("predicate cost must be finite and non-negative");
  if (kind == Kind::kUdf) {
    if (!udf) throw InvalidArgument("UDF predicate '" + udf_name + "' has no evaluator");
    if (udf_name.empty()) throw InvalidArgument("UDF predicate needs a name");
  } else if (key.empty()) {
    throw InvalidArgument("metadata predicate needs a key");
  }
  if (kind == Kind::kMetadataRange && lo && hi && *lo > *hi)
    throw InvalidArgument("range predicate has lo > hi");
}

namespace {

std::optional<MetaValue> lookup(const VectorStore& store, std::size_t row, const std::string& key) {
  const auto& md = store.metadata_at(row);
  if (auto it = md.find(key); it != md.end()) return it->second;
  if (key == "class" && store.label_at(row)) return MetaValue{*store.label_at(row)};
  return std::nullopt;
}

bool metadata_passes(const VectorStore& store, std::size_t row, const Predicate& p) {
  const auto v = lookup(store, row, p.key);
  if (!v) return false;
  if (p.kind == Predicate::Kind::kMetadataEquality) return meta_equals(*v, p.value);
  const auto x = numeric_value(*v);
  if (!x) return false;
  return (!p.lo || *x >= *p.lo) && (!p.hi || *x <= *p.hi);
}

std::vector<const Predicate*> cheapest_first(const PredicateList& predicates) {
  std::vector<const Predicate*> order;
  for (const auto& p : predicates) {
    p.validate();
    order.push_back(&p);
  }
  std::stable_sort(order.begin(), order.end(), [](const Predicate* a, const Predicate* b) {
    return a->cost_per_item < b->cost_per_item;
  });
  return order;
}

bool passes_ordered(const VectorStore& store, std::size_t row,
                    const std::vector<const Predicate*>& order, UdfCache* cache) {
  for (const Predicate* p : order) {
    bool ok;
    if (p->is_udf()) {
      ok = cache ? cache->evaluate(store.version(), *p, store.id_at(row), store.embedding_at(row),
                                   store.metadata_at(row))
                 : p->udf(store.id_at(row), store.embedding_at(row), store.metadata_at(row));
    } else {
      ok = metadata_passes(store, row, *p);
    }
    if (!ok) return false;
  }
  return true;
}

void check_search(const VectorStore& store, EmbeddingView query, std::size_t k) {
  if (store.empty()) throw InvalidArgument("search on an empty store");
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (query.size() != store.dim()) throw DimensionMismatch(store.dim(), query.size());
}

// Rows sorted by the canonical hit order.
std::vector<std::size_t> ranked_rows(const std::vector<RankedHit>& scored) {
  std::vector<std::size_t> rows(scored.size());
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
  std::sort(rows.begin(), rows.end(),
            [&](std::size_t a, std::size_t b) { return hit_before(scored[a], scored[b]); });
  return rows;
}

std::size_t fetch_count(double alpha, std::size_t k, std::size_t n) {
  const double want = std::ceil(alpha * static_cast<double>(k));
  if (!(want < static_cast<double>(n))) return n;
  return static_cast<std::size_t>(want);
}

}  // namespace

double measured_selectivity(const VectorStore& store, const Predicate& p) {
  if (p.is_udf() || store.empty()) return p.selectivity;
  std::size_t pass = 0;
  for (std::size_t row = 0; row < store.size(); ++row) pass += metadata_passes(store, row, p) ? 1 : 0;
  return static_cast<double>(pass) / static_cast<double>(store.size());
}

void calibrate_selectivity(const VectorStore& store, PredicateList& predicates) {
  if (store.empty()) return;
  const double floor = 1.0 / static_cast<double>(store.size());
  for (auto& p : predicates)
    if (!p.is_udf()) p.selectivity = std::max(measured_selectivity(store, p), floor);
}

std::string_view to_string(PlanKind kind) {
  switch (kind) {
    case PlanKind::kFullScan: return "full_scan";
    case PlanKind::kPreFilter: return "prefilter";
    case PlanKind::kPostFilter: return "postfilter";
    case PlanKind::kConstraintFirst: return "constraint_first";
    case PlanKind::kPerObjectJoin: return "per_object_join";
  }
  return "full_scan";
}

double default_alpha(std::size_t store_size, std::size_t k, double selectivity) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (!(selectivity > 0.0 && selectivity <= 1.0))
    throw InvalidArgument("selectivity must lie in (0, 1]");
  const double by_sel = std::ceil(2.0 / selectivity);
  const double cap = std::max(static_cast<double>(store_size) / static_cast<double>(k), 2.0);
  return std::min(by_sel, cap);
}

PlanSpec plan_query(std::size_t store_size, std::size_t k, const PredicateList& predicates,
                    double distance_cost) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (!(distance_cost > 0.0)) throw InvalidArgument("distance cost must be positive");
  const double n = static_cast<double>(store_size);
  PlanSpec plan;
  if (predicates.empty()) {
    plan.kind = PlanKind::kFullScan;
    plan.estimated_cost = n * distance_cost;
    return plan;
  }
  double sel = 1.0, filter_cost = 0.0;
  for (const auto& p : predicates) {
    p.validate();
    sel *= p.selectivity;
    filter_cost += p.cost_per_item;
  }
  plan.selectivity = sel;
  plan.alpha = default_alpha(store_size, k, sel);
  plan.prefilter_cost = n * filter_cost + sel * n * distance_cost;
  plan.postfilter_cost = n * distance_cost + plan.alpha * static_cast<double>(k) * filter_cost;
  if (plan.prefilter_cost < plan.postfilter_cost) {
    plan.kind = PlanKind::kPreFilter;
    plan.estimated_cost = plan.prefilter_cost;
  } else {
    plan.kind = PlanKind::kPostFilter;
    plan.estimated_cost = plan.postfilter_cost;
  }
  return plan;
}

PlanSpec plan_multibody(const ConstraintSet& constraints) {
  PlanSpec plan;
  plan.kind = has_spatial(constraints) ? PlanKind::kConstraintFirst : PlanKind::kPerObjectJoin;
  return plan;
}

bool UdfCache::evaluate(std::uint64_t version, const Predicate& p, ItemId id,
                        EmbeddingView embedding, const Metadata& metadata) {
  {
    std::lock_guard lock(mu_);
    if (version != version_) {
      memo_.clear();
      version_ = version;
    }
    auto it = memo_.find(p.udf_name);
    if (it != memo_.end()) {
      if (auto hit = it->second.find(id); hit != it->second.end()) return hit->second;
    }
  }
  // Evaluated outside the lock; a concurrent duplicate computes the same value.
  const bool result = p.udf(id, embedding, metadata);
  std::lock_guard lock(mu_);
  if (version == version_) {
    auto [slot, inserted] = memo_[p.udf_name].emplace(id, result);
    if (inserted) ++evaluations_;
    return slot->second;
  }
  ++evaluations_;
  return result;
}

std::uint64_t UdfCache::version() const {
  std::lock_guard lock(mu_);
  return version_;
}

std::size_t UdfCache::size() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [name, m] : memo_) n += m.size();
  return n;
}

bool passes(const VectorStore& store, std::size_t row, const PredicateList& predicates,
            UdfCache* cache) {
  return passes_ordered(store, row, cheapest_first(predicates), cache);
}

FilterResult execute_prefilter(const VectorStore& store, EmbeddingView query, std::size_t k,
                               const PredicateList& predicates, Metric metric, UdfCache* cache) {
  check_search(store, query, k);
  const auto order = cheapest_first(predicates);
  FilterResult r;
  std::vector<RankedHit> passing;
  for (std::size_t row = 0; row < store.size(); ++row) {
    if (!passes_ordered(store, row, order, cache)) continue;
    passing.push_back({store.id_at(row), distance(query, store.embedding_at(row), metric)});
  }
  r.fetched = store.size();
  r.short_result = passing.size() < k;
  r.hits = select_topk(std::move(passing), k);
  return r;
}

FilterResult execute_postfilter(const VectorStore& store, EmbeddingView query, std::size_t k,
                                double alpha, const PredicateList& predicates, Metric metric,
                                UdfCache* cache) {
  check_search(store, query, k);
  if (!(alpha > 1.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be > 1");
  const auto order = cheapest_first(predicates);
  const auto scored = score_all(store, query, metric);
  const auto rows = ranked_rows(scored);

  FilterResult r;
  r.final_alpha = alpha;
  std::size_t checked = 0;
  for (;;) {
    const std::size_t fetch = fetch_count(r.final_alpha, k, store.size());
    for (; checked < fetch && r.hits.size() < k; ++checked)
      if (passes_ordered(store, rows[checked], order, cache)) r.hits.push_back(scored[rows[checked]]);
    r.fetched = fetch;
    if (r.hits.size() >= k || fetch == store.size()) break;
    r.final_alpha *= 2.0;
    ++r.escalations;
  }
  r.short_result = r.hits.size() < k;
  return r;
}

double recall_at_alpha(const VectorStore& store, EmbeddingView query, std::size_t k, double alpha,
                       const PredicateList& predicates, Metric metric) {
  check_search(store, query, k);
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  const auto order = cheapest_first(predicates);
  const auto scored = score_all(store, query, metric);
  const auto rows = ranked_rows(scored);
  std::vector<ItemId> single;
  const std::size_t fetch = fetch_count(alpha, k, store.size());
  for (std::size_t i = 0; i < fetch && single.size() < k; ++i)
    if (passes_ordered(store, rows[i], order, nullptr)) single.push_back(scored[rows[i]].id);

  const auto truth = execute_prefilter(store, query, k, predicates, metric).hits;
  if (truth.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& h : truth)
    common += std::find(single.begin(), single.end(), h.id) != single.end() ? 1 : 0;
  return static_cast<double>(common) / static_cast<double>(truth.size());
}

FilterResult execute_plan(const PlanSpec& plan, const VectorStore& store, EmbeddingView query,
                          std::size_t k, const PredicateList& predicates, Metric metric,
                          UdfCache* cache) {
  switch (plan.kind) {
    case PlanKind::kFullScan:
    case PlanKind::kPreFilter:
      return execute_prefilter(store, query, k, predicates, metric, cache);
    case PlanKind::kPostFilter:
      return execute_postfilter(store, query, k, plan.alpha, predicates, metric, cache);
    default:
      throw InvalidArgument("plan kind " + std::string(to_string(plan.kind)) +
                            " does not apply to single-vector search");
  }
}

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto next = s.find(sep, pos);
    out.emplace_back(s.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(std::string_view s, std::string_view what) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw InvalidArgument("cannot parse " + std::string(what) + " '" + t + "' as a number");
  return v;
}

MetaValue parse_scalar(std::string_view s) {
  const std::string t = trim(s);
  if (t == "true") return true;
  if (t == "false") return false;
  std::int64_t i = 0;
  if (auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), i);
      ec == std::errc() && p == t.data() + t.size() && !t.empty())
    return i;
  double d = 0.0;
  if (auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), d);
      ec == std::errc() && p == t.data() + t.size() && !t.empty())
    return d;
  return t;
}

UdfFn make_threshold(std::span<const std::string> args, const UdfRegistry&) {
  if (args.size() != 2) throw InvalidArgument("threshold needs DIM@VALUE");
  const double dim_d = parse_double(args[0], "threshold dimension");
  if (dim_d < 0 || dim_d != std::floor(dim_d)) throw InvalidArgument("threshold dimension must be a non-negative integer");
  const auto dim = static_cast<std::size_t>(dim_d);
  const double value = parse_double(args[1], "threshold value");
  return [dim, value](ItemId, EmbeddingView e, const Metadata&) {
    if (dim >= e.size()) throw DimensionMismatch(dim + 1, e.size());
    return static_cast<double>(e[dim]) >= value;
  };
}

UdfFn make_delay(std::span<const std::string> args, const UdfRegistry& registry) {
  if (args.size() < 2) throw InvalidArgument("delay needs MICROS@INNER");
  const double micros = parse_double(args[0], "delay micros");
  if (micros < 0) throw InvalidArgument("delay must be non-negative");
  std::string inner = args[1];
  for (std::size_t i = 2; i < args.size(); ++i) inner += "@" + args[i];
  UdfFn fn = registry.make(inner);
  const auto wait = std::chrono::microseconds(static_cast<std::int64_t>(micros));
  return [fn, wait](ItemId id, EmbeddingView e, const Metadata& md) {
    std::this_thread::sleep_for(wait);
    return fn(id, e, md);
  };
}

}  // namespace

UdfRegistry::UdfRegistry() {
  add("threshold", make_threshold);
  add("delay", make_delay);
}

void UdfRegistry::add(std::string name, Factory factory) {
  if (name.empty() || name.find_first_of("@:") != std::string::npos)
    throw InvalidArgument("UDF names must be non-empty and free of '@' and ':'");
  factories_[std::move(name)] = std::move(factory);
}

bool UdfRegistry::contains(std::string_view name) const { return factories_.find(name) != factories_.end(); }

UdfFn UdfRegistry::make(std::string_view spec) const {
  auto parts = split(spec, '@');
  auto it = factories_.find(parts.front());
  if (it == factories_.end()) throw InvalidArgument("unknown UDF '" + parts.front() + "'");
  return it->second(std::span<const std::string>(parts).subspan(1), *this);
}

const UdfRegistry& default_udf_registry() {
  static const UdfRegistry registry;
  return registry;
}

Predicate parse_udf_predicate(std::string_view text, const UdfRegistry& registry) {
  const auto last = text.rfind(':');
  const auto mid = last == std::string_view::npos ? last : text.rfind(':', last - 1);
  if (last == std::string_view::npos || mid == std::string_view::npos)
    throw InvalidArgument("UDF predicate must look like name:cost:selectivity");
  const std::string spec = trim(text.substr(0, mid));
  const double cost = parse_double(text.substr(mid + 1, last - mid - 1), "UDF cost");
  const double sel = parse_double(text.substr(last + 1), "UDF selectivity");
  Predicate p = Predicate::make_udf(spec, registry.make(spec), cost, sel);
  p.validate();
  return p;
}

PredicateList parse_filter(std::string_view expr) {
  PredicateList out;
  for (const auto& raw : split(expr, ',')) {
    const std::string clause = trim(raw);
    if (clause.empty()) continue;
    static constexpr std::string_view kOps[] = {">=", "<=", ">", "<", "="};
    std::size_t pos = std::string::npos;
    std::string_view op;
    for (auto candidate : kOps) {
      const auto p = clause.find(candidate);
      if (p != std::string::npos && (pos == std::string::npos || p < pos ||
                                     (p == pos && candidate.size() > op.size()))) {
        pos = p;
        op = candidate;
      }
    }
    if (pos == std::string::npos || pos == 0)
      throw InvalidArgument("cannot parse filter clause '" + clause + "'");
    const std::string key = trim(clause.substr(0, pos));
    const std::string rhs = trim(clause.substr(pos + op.size()));
    if (rhs.empty()) throw InvalidArgument("filter clause '" + clause + "' has no value");
    if (op == "=") {
      if (const auto dots = rhs.find(".."); dots != std::string::npos) {
        out.push_back(Predicate::range(key, parse_double(rhs.substr(0, dots), "range bound"),
                                       parse_double(rhs.substr(dots + 2), "range bound")));
      } else {
        out.push_back(Predicate::equals(key, parse_scalar(rhs)));
      }
    } else {
      const double v = parse_double(rhs, "filter bound");
      const double inf = std::numeric_limits<double>::infinity();
      if (op == ">=") out.push_back(Predicate::range(key, v, std::nullopt));
      if (op == "<=") out.push_back(Predicate::range(key, std::nullopt, v));
      if (op == ">") out.push_back(Predicate::range(key, std::nextafter(v, inf), std::nullopt));
      if (op == "<") out.push_back(Predicate::range(key, std::nullopt, std::nextafter(v, -inf)));
    }
    out.back().validate();
  }
  return out;
}

}  // namespace simsearch
