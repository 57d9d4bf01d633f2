#include "simsearch/multibody.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <tuple>

#include "simsearch/assignment.hpp"

namespace simsearch {

void MultiQuery::validate() const {
  if (objects.empty()) throw InvalidArgument("multi-query needs at least one object");
  if (!weights.empty() && weights.size() != objects.size())
    throw InvalidArgument("multi-query weight count differs from object count");
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("multi-query weights must be positive");
  }
}

void validate_constraints(const ConstraintSet& constraints, std::size_t m) {
  auto check_index = [m](std::size_t i) {
    if (i >= m) throw InvalidArgument("constraint index " + std::to_string(i) + " >= m");
  };
  for (const auto& c : constraints) {
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ClassMatch>) {
            check_index(k.index);
          } else if constexpr (std::is_same_v<K, NextTo>) {
            check_index(k.i);
            check_index(k.j);
            if (k.i == k.j) throw InvalidArgument("NextTo needs two distinct objects");
            if (!(k.max_dist > 0.0)) throw InvalidArgument("NextTo max_dist must be positive");
          } else if constexpr (std::is_same_v<K, AngleOnTop>) {
            check_index(k.i);
            check_index(k.j);
            if (k.i == k.j) throw InvalidArgument("AngleOnTop needs two distinct objects");
            if (!(k.lo_deg <= k.hi_deg)) throw InvalidArgument("AngleOnTop needs lo_deg <= hi_deg");
          }
        },
        c);
  }
}

bool has_spatial(const ConstraintSet& constraints) {
  return std::any_of(constraints.begin(), constraints.end(), [](const Constraint& c) {
    return std::holds_alternative<NextTo>(c) || std::holds_alternative<AngleOnTop>(c);
  });
}

bool requires_same_scene(const ConstraintSet& constraints) {
  return std::any_of(constraints.begin(), constraints.end(),
                     [](const Constraint& c) { return std::holds_alternative<SameScene>(c); });
}

bool eligibility_only(const ConstraintSet& constraints) {
  return std::all_of(constraints.begin(), constraints.end(), [](const Constraint& c) {
    return std::holds_alternative<ClassMatch>(c) || std::holds_alternative<SameScene>(c);
  });
}

double angle_from_up_deg(const Point2& from, const Point2& to) {
  const double dx = to.x - from.x, dy = to.y - from.y;
  const double len = std::hypot(dx, dy);
  if (len == 0.0) return std::numeric_limits<double>::quiet_NaN();
  // Screen up is (0, -1).
  const double cos = std::clamp(-dy / len, -1.0, 1.0);
  return std::acos(cos) * 180.0 / std::numbers::pi;
}

namespace {

bool same_scene(const SceneObject& a, const SceneObject& b) { return a.scene_id == b.scene_id; }

bool check_one(const Constraint& c, std::span<const SceneObject> objects, const MultiQuery& query,
               std::span<const std::size_t> t) {
  return std::visit(
      [&](const auto& k) -> bool {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, ClassMatch>) {
          return objects[t[k.index]].class_label == query.objects[k.index].class_label;
        } else if constexpr (std::is_same_v<K, SameScene>) {
          for (std::size_t i = 1; i < t.size(); ++i)
            if (!same_scene(objects[t[0]], objects[t[i]])) return false;
          return true;
        } else if constexpr (std::is_same_v<K, TemporalOverlap>) {
          for (std::size_t i = 0; i < t.size(); ++i) {
            for (std::size_t j = i + 1; j < t.size(); ++j) {
              const auto& a = objects[t[i]];
              const auto& b = objects[t[j]];
              if (!same_scene(a, b) || !a.frame_span || !b.frame_span) return false;
              if (std::max(a.frame_span->start, b.frame_span->start) >
                  std::min(a.frame_span->end, b.frame_span->end))
                return false;
            }
          }
          return true;
        } else if constexpr (std::is_same_v<K, NextTo>) {
          const auto& a = objects[t[k.i]];
          const auto& b = objects[t[k.j]];
          if (!same_scene(a, b) || !a.centroid || !b.centroid) return false;
          return std::hypot(a.centroid->x - b.centroid->x, a.centroid->y - b.centroid->y) <=
                 k.max_dist;
        } else {
          const auto& a = objects[t[k.i]];
          const auto& b = objects[t[k.j]];
          if (!same_scene(a, b) || !a.centroid || !b.centroid) return false;
          const double angle = angle_from_up_deg(*b.centroid, *a.centroid);
          return angle >= k.lo_deg && angle <= k.hi_deg;
        }
      },
      c);
}

void validate_objects(std::span<const SceneObject> objects) {
  std::set<ObjectKey> keys;
  for (const auto& o : objects) {
    if (!keys.insert(o.key()).second)
      throw InvalidArgument("duplicate object (" + std::to_string(o.scene_id) + ", " +
                            std::to_string(o.object_id) + ")");
    if (o.frame_span && o.frame_span->start > o.frame_span->end)
      throw InvalidArgument("frame span start after end");
  }
}

// Shared problem state: weighted per-slot costs computed once so that every
// strategy sums identical doubles in the same (slot) order.
class Problem {
 public:
  Problem(std::span<const SceneObject> objects, const MultiQuery& query,
          const ConstraintSet& constraints, Metric metric)
      : objects_(objects), query_(query), constraints_(constraints) {
    query.validate();
    validate_constraints(constraints, query.size());
    validate_objects(objects);
    const std::size_t m = query.size();
    cost_.resize(m * objects.size());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t o = 0; o < objects.size(); ++o)
        cost_[i * objects.size() + o] =
            query.weight(i) * distance(query.objects[i].embedding, objects[o].embedding, metric);

    class_pinned_.assign(m, false);
    for (const auto& c : constraints)
      if (const auto* cm = std::get_if<ClassMatch>(&c)) class_pinned_[cm->index] = true;
  }

  std::size_t m() const { return query_.size(); }
  std::size_t n() const { return objects_.size(); }
  double cost(std::size_t slot, std::size_t obj) const { return cost_[slot * n() + obj]; }
  const SceneObject& object(std::size_t o) const { return objects_[o]; }

  bool eligible(std::size_t slot, std::size_t obj) const {
    return !class_pinned_[slot] || objects_[obj].class_label == query_.objects[slot].class_label;
  }

  std::vector<std::size_t> eligible_sorted_by_cost(std::size_t slot) const {
    std::vector<std::size_t> out;
    for (std::size_t o = 0; o < n(); ++o)
      if (eligible(slot, o)) out.push_back(o);
    std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
      if (cost(slot, a) != cost(slot, b)) return cost(slot, a) < cost(slot, b);
      return objects_[a].key() < objects_[b].key();
    });
    return out;
  }

  double score(std::span<const std::size_t> tuple) const {
    double s = 0.0;
    for (std::size_t i = 0; i < tuple.size(); ++i) s += cost(i, tuple[i]);
    return s;
  }

  bool feasible(std::span<const std::size_t> tuple) const {
    return satisfies(objects_, query_, constraints_, tuple);
  }

  Alignment to_alignment(std::span<const std::size_t> tuple) const {
    Alignment a;
    for (std::size_t o : tuple) a.mapping.push_back(objects_[o].key());
    a.score = score(tuple);
    return a;
  }

 private:
  std::span<const SceneObject> objects_;
  const MultiQuery& query_;
  const ConstraintSet& constraints_;
  std::vector<double> cost_;
  std::vector<bool> class_pinned_;
};

bool better(const Alignment& a, const Alignment& b) {
  if (a.score != b.score) return a.score < b.score;
  return a.mapping < b.mapping;
}

void keep_best(std::optional<Alignment>& best, Alignment candidate) {
  if (!best || better(candidate, *best)) best = std::move(candidate);
}

// Tracks the best feasible complete tuple.
struct TupleCollector {
  const Problem& problem;
  MultibodyStats* stats;
  std::optional<Alignment> best;

  void offer(std::span<const std::size_t> tuple) {
    if (stats) ++stats->tuples_evaluated;
    if (!problem.feasible(tuple)) return;
    keep_best(best, problem.to_alignment(tuple));
  }
};

// Enumerates injective completions of `tuple` where unset slots draw from
// `choices[slot]`.
void enumerate(std::vector<std::size_t>& tuple, std::vector<bool>& fixed,
               const std::vector<std::vector<std::size_t>>& choices, std::size_t slot,
               std::vector<char>& used, TupleCollector& out) {
  if (slot == tuple.size()) {
    out.offer(tuple);
    return;
  }
  if (fixed[slot]) {
    enumerate(tuple, fixed, choices, slot + 1, used, out);
    return;
  }
  for (std::size_t o : choices[slot]) {
    if (used[o]) continue;
    used[o] = 1;
    tuple[slot] = o;
    enumerate(tuple, fixed, choices, slot + 1, used, out);
    used[o] = 0;
  }
}

std::optional<Alignment> join(const Problem& problem,
                              const std::vector<std::vector<std::size_t>>& lists,
                              bool scene_partitioned, MultibodyStats* stats) {
  TupleCollector collector{problem, stats, std::nullopt};
  const std::size_t m = problem.m();
  std::vector<std::size_t> tuple(m);
  std::vector<bool> fixed(m, false);
  std::vector<char> used(problem.n(), 0);
  if (!scene_partitioned) {
    enumerate(tuple, fixed, lists, 0, used, collector);
    return collector.best;
  }
  std::map<std::uint64_t, std::vector<std::vector<std::size_t>>> by_scene;
  for (std::size_t slot = 0; slot < m; ++slot) {
    for (std::size_t o : lists[slot]) {
      auto& per_slot = by_scene[problem.object(o).scene_id];
      per_slot.resize(m);
      per_slot[slot].push_back(o);
    }
  }
  for (auto& [scene, per_slot] : by_scene) {
    if (std::any_of(per_slot.begin(), per_slot.end(), [](const auto& l) { return l.empty(); }))
      continue;
    enumerate(tuple, fixed, per_slot, 0, used, collector);
  }
  return collector.best;
}

}  // namespace

bool satisfies(std::span<const SceneObject> objects, const MultiQuery& query,
               const ConstraintSet& constraints, std::span<const std::size_t> tuple) {
  for (std::size_t i = 0; i < tuple.size(); ++i)
    for (std::size_t j = i + 1; j < tuple.size(); ++j)
      if (tuple[i] == tuple[j]) return false;
  return std::all_of(constraints.begin(), constraints.end(),
                     [&](const Constraint& c) { return check_one(c, objects, query, tuple); });
}

std::uint64_t count_alignments(std::uint64_t n, std::uint64_t m) {
  if (m > n) throw InvalidArgument("count_alignments: m exceeds n");
  std::uint64_t total = 1;
  for (std::uint64_t i = 0; i < m; ++i) {
    const std::uint64_t factor = n - i;
    if (total > std::numeric_limits<std::uint64_t>::max() / factor)
      throw InvalidArgument("count_alignments: result overflows 64 bits");
    total *= factor;
  }
  return total;
}

std::optional<Alignment> brute_force_best(std::span<const SceneObject> objects,
                                          const MultiQuery& query, const ConstraintSet& constraints,
                                          Metric metric, MultibodyStats* stats) {
  Problem problem(objects, query, constraints, metric);
  if (problem.m() > problem.n()) return std::nullopt;
  std::vector<std::size_t> order(problem.n());
  for (std::size_t o = 0; o < order.size(); ++o) order[o] = o;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return objects[a].key() < objects[b].key(); });
  const std::vector<std::vector<std::size_t>> every(problem.m(), order);
  if (stats) stats->rounds = 1;
  return join(problem, every, false, stats);
}

std::optional<Alignment> assignment_best(std::span<const SceneObject> objects,
                                         const MultiQuery& query, const ConstraintSet& constraints,
                                         Metric metric) {
  if (!eligibility_only(constraints))
    throw InvalidArgument("assignment_best: only ClassMatch / SameScene constraints supported");
  Problem problem(objects, query, constraints, metric);
  const std::size_t m = problem.m();

  std::map<std::uint64_t, std::vector<std::size_t>> groups;
  if (requires_same_scene(constraints)) {
    for (std::size_t o = 0; o < problem.n(); ++o) groups[objects[o].scene_id].push_back(o);
  } else {
    auto& all = groups[0];
    for (std::size_t o = 0; o < problem.n(); ++o) all.push_back(o);
  }

  std::optional<Alignment> best;
  for (const auto& [scene, members] : groups) {
    if (members.size() < m) continue;
    CostMatrix cost(m, members.size());
    EligibilityMask mask(m, members.size());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t c = 0; c < members.size(); ++c) {
        cost(i, c) = problem.cost(i, members[c]);
        mask(i, c) = problem.eligible(i, members[c]) ? 1 : 0;
      }
    auto solved = optimal_assignment(cost, &mask);
    if (!solved) continue;
    std::vector<std::size_t> tuple(m);
    for (std::size_t i = 0; i < m; ++i) tuple[i] = members[solved->columns[i]];
    keep_best(best, problem.to_alignment(tuple));
  }
  return best;
}

std::optional<Alignment> strategy_per_object(std::span<const SceneObject> objects,
                                             const MultiQuery& query,
                                             const ConstraintSet& constraints, std::size_t k0,
                                             Metric metric, MultibodyStats* stats) {
  if (k0 == 0) throw InvalidArgument("strategy_per_object: k0 must be at least 1");
  Problem problem(objects, query, constraints, metric);
  const std::size_t m = problem.m();
  if (m > problem.n()) return std::nullopt;

  std::vector<std::vector<std::size_t>> ranked(m);
  for (std::size_t slot = 0; slot < m; ++slot) {
    ranked[slot] = problem.eligible_sorted_by_cost(slot);
    if (ranked[slot].empty()) return std::nullopt;
  }
  const bool partitioned = requires_same_scene(constraints);

  std::size_t k = k0;
  for (;;) {
    if (stats) {
      ++stats->rounds;
      stats->final_k = k;
    }
    std::vector<std::vector<std::size_t>> lists(m);
    bool all_exhausted = true;
    for (std::size_t slot = 0; slot < m; ++slot) {
      const std::size_t take = std::min(k, ranked[slot].size());
      lists[slot].assign(ranked[slot].begin(), ranked[slot].begin() + static_cast<std::ptrdiff_t>(take));
      if (take < ranked[slot].size()) all_exhausted = false;
    }

    auto best = join(problem, lists, partitioned, stats);
    if (all_exhausted) return best;

    if (best) {
      // Any tuple with an object outside slot s's list costs at least
      // first_excluded(s) there and at least the slot minimum elsewhere.
      // Summing in slot order keeps the bound valid under rounding.
      double bound = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < m; ++s) {
        if (lists[s].size() == ranked[s].size()) continue;
        double lb = 0.0;
        for (std::size_t i = 0; i < m; ++i)
          lb += (i == s) ? problem.cost(i, ranked[i][lists[i].size()]) : problem.cost(i, ranked[i][0]);
        bound = std::min(bound, lb);
      }
      if (best->score <= bound) return best;
    }
    k *= 2;
  }
}

std::optional<Alignment> strategy_constraint_first(std::span<const SceneObject> objects,
                                                   const MultiQuery& query,
                                                   const ConstraintSet& constraints, Metric metric,
                                                   MultibodyStats* stats) {
  if (!has_spatial(constraints)) {
    if (stats) stats->fell_back = true;
    return strategy_per_object(objects, query, constraints, kDefaultPerObjectK0, metric, stats);
  }
  Problem problem(objects, query, constraints, metric);
  const std::size_t m = problem.m();
  if (m > problem.n()) return std::nullopt;

  std::vector<std::vector<std::size_t>> eligible(m);
  for (std::size_t slot = 0; slot < m; ++slot)
    for (std::size_t o = 0; o < problem.n(); ++o)
      if (problem.eligible(slot, o)) eligible[slot].push_back(o);

  // Anchor on the tightest NextTo, else the first AngleOnTop.
  const NextTo* next_anchor = nullptr;
  const AngleOnTop* angle_anchor = nullptr;
  double cell = 0.0;
  for (const auto& c : constraints) {
    if (const auto* nt = std::get_if<NextTo>(&c)) {
      cell = std::max(cell, nt->max_dist);
      if (!next_anchor || nt->max_dist < next_anchor->max_dist) next_anchor = nt;
    } else if (const auto* at = std::get_if<AngleOnTop>(&c)) {
      if (!angle_anchor) angle_anchor = at;
    }
  }
  const std::size_t slot_a = next_anchor ? next_anchor->i : angle_anchor->i;
  const std::size_t slot_b = next_anchor ? next_anchor->j : angle_anchor->j;

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (next_anchor) {
    using Cell = std::tuple<std::uint64_t, std::int64_t, std::int64_t>;
    auto cell_of = [&](const SceneObject& o) {
      return Cell{o.scene_id, static_cast<std::int64_t>(std::floor(o.centroid->x / cell)),
                  static_cast<std::int64_t>(std::floor(o.centroid->y / cell))};
    };
    std::map<Cell, std::vector<std::size_t>> grid;
    for (std::size_t o : eligible[slot_b])
      if (problem.object(o).centroid) grid[cell_of(problem.object(o))].push_back(o);
    for (std::size_t a : eligible[slot_a]) {
      const auto& oa = problem.object(a);
      if (!oa.centroid) continue;
      const auto [scene, gx, gy] = cell_of(oa);
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          auto it = grid.find(Cell{scene, gx + dx, gy + dy});
          if (it == grid.end()) continue;
          for (std::size_t b : it->second) {
            if (b == a) continue;
            const auto& ob = problem.object(b);
            if (std::hypot(oa.centroid->x - ob.centroid->x, oa.centroid->y - ob.centroid->y) <=
                next_anchor->max_dist)
              pairs.emplace_back(a, b);
          }
        }
      }
    }
  } else {
    std::map<std::uint64_t, std::vector<std::size_t>> by_scene;
    for (std::size_t o : eligible[slot_b])
      if (problem.object(o).centroid) by_scene[problem.object(o).scene_id].push_back(o);
    for (std::size_t a : eligible[slot_a]) {
      const auto& oa = problem.object(a);
      if (!oa.centroid) continue;
      auto it = by_scene.find(oa.scene_id);
      if (it == by_scene.end()) continue;
      for (std::size_t b : it->second) {
        if (b == a) continue;
        const double angle = angle_from_up_deg(*problem.object(b).centroid, *oa.centroid);
        if (angle >= angle_anchor->lo_deg && angle <= angle_anchor->hi_deg) pairs.emplace_back(a, b);
      }
    }
  }
  if (stats) {
    stats->candidate_pairs = pairs.size();
    stats->rounds = 1;
  }

  const bool same = requires_same_scene(constraints);
  std::map<std::uint64_t, std::vector<std::vector<std::size_t>>> eligible_by_scene;
  if (same) {
    for (std::size_t slot = 0; slot < m; ++slot)
      for (std::size_t o : eligible[slot]) {
        auto& per_slot = eligible_by_scene[problem.object(o).scene_id];
        per_slot.resize(m);
        per_slot[slot].push_back(o);
      }
  }

  TupleCollector collector{problem, stats, std::nullopt};
  std::vector<std::size_t> tuple(m);
  std::vector<bool> fixed(m, false);
  fixed[slot_a] = fixed[slot_b] = true;
  std::vector<char> used(problem.n(), 0);
  for (const auto& [a, b] : pairs) {
    tuple[slot_a] = a;
    tuple[slot_b] = b;
    used[a] = used[b] = 1;
    const auto& choices = same ? eligible_by_scene[problem.object(a).scene_id] : eligible;
    enumerate(tuple, fixed, choices, 0, used, collector);
    used[a] = used[b] = 0;
  }
  return collector.best;
}

WarmStartResult warm_start_window(const Alignment& prev, std::int64_t window_shift,
                                  std::span<const SceneObject> objects, const MultiQuery& query,
                                  const ConstraintSet& constraints, Metric metric) {
  if (window_shift == 0) return {prev, true};

  Problem problem(objects, query, constraints, metric);
  const std::size_t m = problem.m();

  std::map<ObjectKey, std::size_t> index;
  for (std::size_t o = 0; o < problem.n(); ++o) index.emplace(objects[o].key(), o);

  bool mapped = prev.mapping.size() == m;
  std::vector<std::size_t> tuple(m);
  for (std::size_t i = 0; mapped && i < m; ++i) {
    auto it = index.find(prev.mapping[i]);
    if (it == index.end()) mapped = false;
    else tuple[i] = it->second;
  }

  if (mapped && problem.feasible(tuple)) {
    double bound = 0.0;
    bool bounded = true;
    for (std::size_t i = 0; i < m; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t o = 0; o < problem.n(); ++o)
        if (problem.eligible(i, o)) best = std::min(best, problem.cost(i, o));
      if (!std::isfinite(best)) bounded = false;
      bound += best;
    }
    const double rescored = problem.score(tuple);
    if (bounded && bound >= rescored) return {problem.to_alignment(tuple), true};
  }

  auto fresh = has_spatial(constraints)
                   ? strategy_constraint_first(objects, query, constraints, metric)
                   : strategy_per_object(objects, query, constraints, kDefaultPerObjectK0, metric);
  return {std::move(fresh), false};
}

std::vector<SceneObject> window_objects(std::span<const Trajectory> tracks, std::int64_t start,
                                        std::size_t length) {
  if (start < 0) throw InvalidArgument("window start must be non-negative");
  if (length == 0) throw InvalidArgument("window length must be positive");
  const auto first = static_cast<std::size_t>(start);
  std::vector<SceneObject> out;
  for (const auto& track : tracks) {
    if (track.positions.size() < first + length) continue;
    SceneObject o;
    o.scene_id = track.scene_id;
    o.object_id = track.object_id;
    o.class_label = track.class_label;
    o.frame_span = FrameSpan{start, start + static_cast<std::int64_t>(length) - 1};
    const Point2 origin = track.positions[first];
    Point2 mean;
    for (std::size_t t = 0; t < length; ++t) {
      const Point2& p = track.positions[first + t];
      o.embedding.push_back(static_cast<float>(p.x - origin.x));
      o.embedding.push_back(static_cast<float>(p.y - origin.y));
      mean.x += p.x;
      mean.y += p.y;
    }
    mean.x /= static_cast<double>(length);
    mean.y /= static_cast<double>(length);
    o.centroid = mean;
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace simsearch
