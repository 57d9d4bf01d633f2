#pragma once

// Multi-body search: given m ordered query objects, find m distinct corpus
// objects minimizing sum_i weight_i * d(q_i, o_i) subject to inter-object
// constraints.
//
// Conventions:
//  * Spatial and temporal constraints only hold between objects of the same
//    scene; centroids and frame spans are scene-local.
//  * AngleOnTop(i, j, lo, hi) measures the vector centroid_j -> centroid_i
//    against the screen's up direction (y grows downward), unsigned, in
//    degrees, inclusive range.
//  * Ties between equal scores go to the lexicographically smallest tuple of
//    (scene_id, object_id) keys.

#include <compare>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "simsearch/core.hpp"

namespace simsearch {

struct ObjectKey {
  std::uint64_t scene_id = 0;
  std::uint64_t object_id = 0;
  auto operator<=>(const ObjectKey&) const = default;
};

struct FrameSpan {
  std::int64_t start = 0;
  std::int64_t end = 0;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct SceneObject {
  std::uint64_t scene_id = 0;
  std::uint64_t object_id = 0;
  std::string class_label;
  Embedding embedding;
  std::optional<FrameSpan> frame_span;
  std::optional<Point2> centroid;

  ObjectKey key() const { return {scene_id, object_id}; }
};

struct QueryObject {
  std::string class_label;
  Embedding embedding;
};

struct MultiQuery {
  std::vector<QueryObject> objects;
  std::vector<double> weights;  // empty means all ones

  std::size_t size() const noexcept { return objects.size(); }
  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
  void validate() const;
};

struct ClassMatch {
  std::size_t index = 0;
};
struct SameScene {};
struct TemporalOverlap {};
struct NextTo {
  std::size_t i = 0, j = 0;
  double max_dist = 0.0;  // pixels
};
struct AngleOnTop {
  std::size_t i = 0, j = 0;
  double lo_deg = 0.0, hi_deg = 0.0;
};

using Constraint = std::variant<ClassMatch, SameScene, TemporalOverlap, NextTo, AngleOnTop>;
using ConstraintSet = std::vector<Constraint>;

// Throws InvalidArgument when an index is >= m or a parameter is out of range.
void validate_constraints(const ConstraintSet& constraints, std::size_t m);
bool has_spatial(const ConstraintSet& constraints);
bool requires_same_scene(const ConstraintSet& constraints);
// True when every constraint is a ClassMatch or SameScene, i.e. the problem is
// an assignment problem per scene.
bool eligibility_only(const ConstraintSet& constraints);

double angle_from_up_deg(const Point2& from, const Point2& to);

struct Alignment {
  std::vector<ObjectKey> mapping;  // mapping[i] answers query object i
  double score = 0.0;              // weighted distance sum, lower is better
};

struct MultibodyStats {
  std::size_t tuples_evaluated = 0;
  std::size_t candidate_pairs = 0;
  std::size_t rounds = 0;
  std::size_t final_k = 0;
  bool fell_back = false;
};

// Checks a complete tuple (indices into `objects`) against every constraint.
bool satisfies(std::span<const SceneObject> objects, const MultiQuery& query,
               const ConstraintSet& constraints, std::span<const std::size_t> tuple);

// Number of injective mappings of m query objects onto n objects: n!/(n-m)!.
std::uint64_t count_alignments(std::uint64_t n, std::uint64_t m);

// Exhaustive oracle over every injective mapping.
std::optional<Alignment> brute_force_best(std::span<const SceneObject> objects,
                                          const MultiQuery& query, const ConstraintSet& constraints,
                                          Metric metric = Metric::kEuclidean,
                                          MultibodyStats* stats = nullptr);

// Hungarian solution for ClassMatch/SameScene-only constraint sets (per scene
// when SameScene is present). Throws InvalidArgument for other constraints.
std::optional<Alignment> assignment_best(std::span<const SceneObject> objects,
                                         const MultiQuery& query, const ConstraintSet& constraints,
                                         Metric metric = Metric::kEuclidean);

// Per-object top-k' retrieval, join, constraint check. k' starts at k0 and
// doubles until the best joined tuple is provably optimal (no tuple using an
// object outside the candidate lists can score lower) or the lists cover every
// eligible object.
std::optional<Alignment> strategy_per_object(std::span<const SceneObject> objects,
                                             const MultiQuery& query,
                                             const ConstraintSet& constraints, std::size_t k0,
                                             Metric metric = Metric::kEuclidean,
                                             MultibodyStats* stats = nullptr);

inline constexpr std::size_t kDefaultPerObjectK0 = 4;

// Builds candidate pairs for the most selective spatial constraint (uniform
// grid for NextTo, class partitions otherwise), extends them to full tuples and
// scores only feasible ones. Without a spatial constraint this falls back to
// strategy_per_object.
std::optional<Alignment> strategy_constraint_first(std::span<const SceneObject> objects,
                                                   const MultiQuery& query,
                                                   const ConstraintSet& constraints,
                                                   Metric metric = Metric::kEuclidean,
                                                   MultibodyStats* stats = nullptr);

struct WarmStartResult {
  std::optional<Alignment> alignment;
  bool reused = false;
};

// Re-scores `prev` on the shifted window's objects and keeps it when the sum of
// per-slot best costs proves it optimal; otherwise runs a full strategy.
WarmStartResult warm_start_window(const Alignment& prev, std::int64_t window_shift,
                                  std::span<const SceneObject> objects, const MultiQuery& query,
                                  const ConstraintSet& constraints,
                                  Metric metric = Metric::kEuclidean);

// Object tracks for sliding-window multi-body search.
struct Trajectory {
  std::uint64_t scene_id = 0;
  std::uint64_t object_id = 0;
  std::string class_label;
  std::vector<Point2> positions;  // one per frame from frame 0
};

// Objects for frames [start, start + length): embedding is the displacement
// from the window's first position (x, y interleaved), centroid the mean
// position, frame_span the window. Trajectories too short are skipped.
std::vector<SceneObject> window_objects(std::span<const Trajectory> tracks, std::int64_t start,
                                        std::size_t length);

}  // namespace simsearch
