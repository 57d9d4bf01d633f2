#pragma once

// Hybrid queries: k nearest neighbours among the items passing a conjunction of
// predicates. Costs are abstract units where one distance evaluation costs 1.

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "simsearch/core.hpp"
#include "simsearch/multibody.hpp"

namespace simsearch {

using UdfFn = std::function<bool(ItemId id, EmbeddingView embedding, const Metadata& metadata)>;

struct Predicate {
  enum class Kind { kMetadataEquality, kMetadataRange, kUdf };

  Kind kind = Kind::kMetadataEquality;
  // Metadata predicates. The key "class" falls back to the item's class label
  // when the metadata has no such entry.
  std::string key;
  MetaValue value;                       // equality
  std::optional<double> lo, hi;          // range, inclusive, numeric values only
  // UDF predicates.
  std::string udf_name;
  UdfFn udf;
  std::optional<double> accuracy;        // carried, unused by the planner

  double cost_per_item = kMetadataCost;
  double selectivity = 1.0;              // estimate in (0, 1]

  static constexpr double kMetadataCost = 0.01;

  static Predicate equals(std::string key, MetaValue value, double selectivity = 1.0);
  static Predicate range(std::string key, std::optional<double> lo, std::optional<double> hi,
                         double selectivity = 1.0);
  static Predicate make_udf(std::string name, UdfFn fn, double cost_per_item, double selectivity);

  bool is_udf() const noexcept { return kind == Kind::kUdf; }
  // Throws InvalidArgument on out-of-range cost/selectivity or a missing evaluator.
  void validate() const;
};

using PredicateList = std::vector<Predicate>;

// Fraction of `store` passing a metadata predicate; UDFs keep their estimate.
double measured_selectivity(const VectorStore& store, const Predicate& p);
// Replaces metadata selectivity estimates by exact counts (floored at 1/N).
void calibrate_selectivity(const VectorStore& store, PredicateList& predicates);

enum class PlanKind { kFullScan, kPreFilter, kPostFilter, kConstraintFirst, kPerObjectJoin };
std::string_view to_string(PlanKind kind);

struct PlanSpec {
  PlanKind kind = PlanKind::kFullScan;
  double alpha = 0.0;            // > 1 for kPostFilter
  double estimated_cost = 0.0;
  double selectivity = 1.0;      // combined estimate
  double prefilter_cost = 0.0;
  double postfilter_cost = 0.0;
};

double default_alpha(std::size_t store_size, std::size_t k, double selectivity);

// PreFilter:  N*f + sel*N*D.   PostFilter: N*D + alpha*k*f.
// f is the summed per-item predicate cost, sel the product of selectivities,
// D = distance_cost. Ties go to PostFilter. No predicates gives kFullScan.
PlanSpec plan_query(std::size_t store_size, std::size_t k, const PredicateList& predicates,
                    double distance_cost = 1.0);

// Multi-object queries: constraint-first when a spatial constraint can seed
// candidate pairs, otherwise a per-object join.
PlanSpec plan_multibody(const ConstraintSet& constraints);

// Memoized UDF results for one dataset version. Switching versions clears it.
class UdfCache {
 public:
  explicit UdfCache(std::uint64_t version = 0) : version_(version) {}

  bool evaluate(std::uint64_t version, const Predicate& p, ItemId id, EmbeddingView embedding,
                const Metadata& metadata);

  std::size_t evaluations() const noexcept { return evaluations_.load(); }
  std::uint64_t version() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::uint64_t version_;
  std::map<std::string, std::unordered_map<ItemId, bool>, std::less<>> memo_;
  std::atomic<std::size_t> evaluations_{0};
};

struct FilterResult {
  std::vector<RankedHit> hits;
  bool short_result = false;     // fewer than k items pass
  std::size_t fetched = 0;       // candidates whose predicates were checked
  double final_alpha = 0.0;
  std::size_t escalations = 0;
};

// Evaluates predicates cheapest first with short-circuiting. UDF calls go
// through `cache` when one is given.
bool passes(const VectorStore& store, std::size_t row, const PredicateList& predicates,
            UdfCache* cache);

FilterResult execute_prefilter(const VectorStore& store, EmbeddingView query, std::size_t k,
                               const PredicateList& predicates, Metric metric,
                               UdfCache* cache = nullptr);

// Fetches the ceil(alpha*k) nearest, filters, and doubles alpha until k items
// survive or the whole store was fetched.
FilterResult execute_postfilter(const VectorStore& store, EmbeddingView query, std::size_t k,
                                double alpha, const PredicateList& predicates, Metric metric,
                                UdfCache* cache = nullptr);

// Single pass of PostFilter(alpha) without escalation, compared with the
// PreFilter result: |intersection| / |PreFilter hits| (1 when nothing passes).
double recall_at_alpha(const VectorStore& store, EmbeddingView query, std::size_t k, double alpha,
                       const PredicateList& predicates, Metric metric = Metric::kEuclidean);

// Dispatches on plan.kind (kFullScan, kPreFilter, kPostFilter).
FilterResult execute_plan(const PlanSpec& plan, const VectorStore& store, EmbeddingView query,
                          std::size_t k, const PredicateList& predicates, Metric metric,
                          UdfCache* cache = nullptr);

// Named UDF constructors. A spec is "name@arg@arg...". Built-ins:
//   threshold@DIM@VALUE    passes when embedding[DIM] >= VALUE
//   delay@MICROS@INNER...  sleeps MICROS then evaluates the INNER spec
class UdfRegistry {
 public:
  using Factory = std::function<UdfFn(std::span<const std::string> args, const UdfRegistry&)>;

  UdfRegistry();  // registers the built-ins
  void add(std::string name, Factory factory);
  UdfFn make(std::string_view spec) const;
  bool contains(std::string_view name) const;

 private:
  std::map<std::string, Factory, std::less<>> factories_;
};

const UdfRegistry& default_udf_registry();

// "SPEC:COST:SEL", e.g. "threshold@0@0.5:50:0.3".
Predicate parse_udf_predicate(std::string_view text, const UdfRegistry& registry = default_udf_registry());

// Comma-separated clauses: key=value, key>=x, key<=x, key>x, key<x, key=lo..hi.
// Strict bounds are applied as inclusive bounds nudged by one ulp.
PredicateList parse_filter(std::string_view expr);

}  // namespace simsearch
