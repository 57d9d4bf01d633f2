#include "simsearch/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <set>

namespace simsearch::synthetic {

namespace {

using Rng = std::mt19937_64;

double normal(Rng& rng, double sigma = 1.0) { return std::normal_distribution<double>(0.0, sigma)(rng); }
double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {  // inclusive
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}
bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

Embedding gaussian(Rng& rng, std::size_t dim, double sigma = 1.0) {
  Embedding e(dim);
  for (auto& v : e) v = static_cast<float>(normal(rng, sigma));
  return e;
}

std::vector<double> unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      n2 += x * x;
    }
  } while (n2 == 0.0);
  for (auto& x : v) x /= std::sqrt(n2);
  return v;
}

EventSeries to_series(const std::vector<Embedding>& frames) {
  std::vector<Event> events;
  for (std::size_t i = 0; i < frames.size(); ++i)
    events.push_back({static_cast<std::int64_t>(i) * 100, frames[i]});
  return EventSeries(std::move(events));
}

}  // namespace

ClusterDataset two_clusters(std::uint64_t seed, std::size_t n_each, double sigma_tight,
                            double sigma_wide, double separation) {
  Rng rng(seed);
  ClusterDataset d;
  d.store = VectorStore(2);
  for (std::size_t i = 0; i < n_each; ++i) {
    const float p[2] = {static_cast<float>(normal(rng, sigma_tight)),
                        static_cast<float>(normal(rng, sigma_tight))};
    d.store.add(p, "tight");
    const float q[2] = {static_cast<float>(separation + normal(rng, sigma_wide)),
                        static_cast<float>(normal(rng, sigma_wide))};
    d.store.add(q, "wide");
  }
  d.query = {static_cast<float>(2.5 * sigma_tight + normal(rng, 0.25 * sigma_tight)),
             static_cast<float>(normal(rng, 0.25 * sigma_tight))};
  d.query_class = "tight";
  return d;
}

ClusterDataset correlated_corner(std::uint64_t seed, std::size_t n, double rho, double extremity) {
  Rng rng(seed);
  ClusterDataset d;
  d.store = VectorStore(2);
  const double s = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = normal(rng);
    const double y = rho * x + s * normal(rng);
    const float p[2] = {static_cast<float>(x), static_cast<float>(y)};
    d.store.add(p, "point");
  }
  d.query = {static_cast<float>(extremity), static_cast<float>(extremity)};
  d.query_class = "point";
  return d;
}

SeparableDataset separable_clusters(std::uint64_t seed, std::size_t n_pos, std::size_t n_neg,
                                    std::size_t dim, double gap) {
  Rng rng(seed);
  SeparableDataset d;
  d.store = VectorStore(dim);
  const auto dir = unit_vector(rng, dim);
  const double radius = gap / 4.0;
  auto sample = [&](double shift) {
    std::vector<double> v(dim);
    double n2 = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      n2 += x * x;
    }
    const double scale = std::sqrt(n2) > radius ? radius / std::sqrt(n2) : 1.0;
    Embedding e(dim);
    for (std::size_t i = 0; i < dim; ++i) e[i] = static_cast<float>(v[i] * scale + shift * dir[i]);
    return e;
  };
  for (std::size_t i = 0; i < n_pos; ++i) {
    Embedding e = sample(gap);
    d.positive_ids.push_back(d.store.add(e, "pos"));
    d.positives.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < n_neg; ++i) d.negative_ids.push_back(d.store.add(sample(0.0), "neg"));
  return d;
}

VectorStore blobs(std::uint64_t seed, std::size_t n, std::size_t dim, std::size_t clusters,
                  double spread, double sigma) {
  if (clusters == 0) throw InvalidArgument("blobs: need at least one cluster");
  Rng rng(seed);
  std::vector<Embedding> centres;
  for (std::size_t c = 0; c < clusters; ++c) centres.push_back(gaussian(rng, dim, spread));
  VectorStore store(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % clusters;
    Embedding e = centres[c];
    for (auto& v : e) v += static_cast<float>(normal(rng, sigma));
    store.add(e, "c" + std::to_string(c), Metadata{{"cluster", static_cast<std::int64_t>(c)}});
  }
  return store;
}

VectorStore anisotropic(std::uint64_t seed, std::size_t n, std::size_t dim, double decay) {
  Rng rng(seed);
  VectorStore store(dim);
  for (std::size_t i = 0; i < n; ++i) {
    Embedding e(dim);
    double scale = 1.0;
    for (auto& v : e) {
      v = static_cast<float>(normal(rng, scale));
      scale *= decay;
    }
    store.add(e);
  }
  return store;
}

TaskLog planted_task_log(std::uint64_t seed, const TaskLogParams& p) {
  if (p.length == 0 || p.dim == 0 || p.min_gap > p.max_gap)
    throw InvalidArgument("planted_task_log: invalid parameters");
  Rng rng(seed);
  const std::size_t tasks = p.instances_per_task.size();
  std::vector<std::vector<Embedding>> protos(tasks);
  for (auto& proto : protos)
    for (std::size_t i = 0; i < p.length; ++i) proto.push_back(gaussian(rng, p.dim, p.prototype_scale));

  std::vector<std::size_t> order;
  for (std::size_t t = 0; t < tasks; ++t) order.insert(order.end(), p.instances_per_task[t], t);
  std::shuffle(order.begin(), order.end(), rng);

  TaskLog log;
  log.instances.resize(tasks);
  std::vector<Embedding> frames;
  auto background = [&](std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) frames.push_back(gaussian(rng, p.dim, p.background_scale));
  };
  for (std::size_t t : order) {
    background(pick(rng, p.min_gap, p.max_gap));
    log.instances[t].push_back({frames.size(), p.length});
    for (const auto& e : protos[t]) {
      Embedding x = e;
      for (auto& v : x) v += static_cast<float>(normal(rng, p.instance_noise));
      frames.push_back(std::move(x));
    }
  }
  background(pick(rng, p.min_gap, p.max_gap));

  std::vector<Event> events;
  std::int64_t t_ms = 0;
  for (auto& f : frames) {
    events.push_back({t_ms, std::move(f)});
    t_ms += 100 + static_cast<std::int64_t>(pick(rng, 0, 50));
  }
  log.series = EventSeries(std::move(events));
  for (const auto& proto : protos) log.templates.push_back(to_series(proto));
  return log;
}

TaskLog skewed_task_log(std::uint64_t seed, std::size_t n_target, std::size_t n_distractor,
                        double offset) {
  constexpr std::size_t kLength = 16, kDim = 6;
  Rng rng(seed);
  std::vector<Embedding> proto;
  std::vector<std::vector<double>> dir;
  for (std::size_t i = 0; i < kLength; ++i) {
    proto.push_back(gaussian(rng, kDim, 2.0));
    dir.push_back(unit_vector(rng, kDim));
  }
  // Instance at displacement s along the per-event direction field.
  auto instance = [&](double s, double noise) {
    std::vector<Embedding> out;
    for (std::size_t i = 0; i < kLength; ++i) {
      Embedding x = proto[i];
      for (std::size_t d = 0; d < kDim; ++d)
        x[d] += static_cast<float>(s * dir[i][d] + normal(rng, noise));
      out.push_back(std::move(x));
    }
    return out;
  };

  std::vector<std::size_t> order(n_target, 0);
  order.insert(order.end(), n_distractor, 1);
  std::shuffle(order.begin(), order.end(), rng);

  TaskLog log;
  log.instances.resize(2);
  std::vector<Embedding> frames;
  auto background = [&](std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) frames.push_back(gaussian(rng, kDim, 2.0));
  };
  for (std::size_t t : order) {
    background(pick(rng, 4, 12));
    log.instances[t].push_back({frames.size(), kLength});
    const auto inst = t == 0 ? instance(0.0, 0.15) : instance(uniform(rng, 0.0, 2.5) * offset, 0.3);
    frames.insert(frames.end(), inst.begin(), inst.end());
  }
  background(pick(rng, 4, 12));
  log.series = to_series(frames);
  log.templates.push_back(to_series(instance(0.5 * offset, 0.15)));
  log.templates.push_back(to_series(instance(1.25 * offset, 0.3)));
  return log;
}

MultibodyInstance player_scenes(std::uint64_t seed, std::size_t scenes, std::size_t dim) {
  Rng rng(seed);
  MultibodyInstance inst;
  for (std::size_t s = 0; s < scenes; ++s) {
    for (std::uint64_t o = 0; o < 5; ++o) {
      SceneObject obj;
      obj.scene_id = s;
      obj.object_id = o;
      obj.class_label = o < 4 ? "player" : "ball";
      obj.embedding = gaussian(rng, dim);
      const auto start = static_cast<std::int64_t>(pick(rng, 0, 20));
      obj.frame_span = FrameSpan{start, start + 60 + static_cast<std::int64_t>(pick(rng, 0, 40))};
      obj.centroid = Point2{uniform(rng, 0, 640), uniform(rng, 0, 480)};
      inst.objects.push_back(std::move(obj));
    }
  }
  inst.query.objects = {{"player", gaussian(rng, dim)}, {"player", gaussian(rng, dim)},
                        {"ball", gaussian(rng, dim)}};
  inst.constraints = {ClassMatch{2}, SameScene{}, TemporalOverlap{}};
  return inst;
}

MultibodyInstance random_multibody(std::uint64_t seed, std::size_t max_n, std::size_t max_m,
                                   std::size_t dim) {
  if (max_m == 0 || max_n < max_m) throw InvalidArgument("random_multibody: need 1 <= max_m <= max_n");
  Rng rng(seed);
  static const char* kClasses[] = {"a", "b", "c"};
  MultibodyInstance inst;
  const std::size_t m = pick(rng, 1, max_m);
  const std::size_t n = pick(rng, m, max_n);
  const std::size_t scenes = pick(rng, 1, 3);
  for (std::size_t i = 0; i < n; ++i) {
    SceneObject o;
    o.scene_id = pick(rng, 0, scenes - 1);
    o.object_id = i;
    o.class_label = kClasses[pick(rng, 0, 2)];
    o.embedding = gaussian(rng, dim);
    if (coin(rng, 0.9)) {
      const auto start = static_cast<std::int64_t>(pick(rng, 0, 50));
      o.frame_span = FrameSpan{start, start + static_cast<std::int64_t>(pick(rng, 0, 30))};
    }
    if (coin(rng, 0.9)) o.centroid = Point2{uniform(rng, 0, 100), uniform(rng, 0, 100)};
    inst.objects.push_back(std::move(o));
  }
  for (std::size_t i = 0; i < m; ++i)
    inst.query.objects.push_back({kClasses[pick(rng, 0, 2)], gaussian(rng, dim)});
  if (coin(rng, 0.5))
    for (std::size_t i = 0; i < m; ++i) inst.query.weights.push_back(uniform(rng, 0.5, 2.0));

  for (std::size_t i = 0; i < m; ++i)
    if (coin(rng, 0.4)) inst.constraints.push_back(ClassMatch{i});
  if (coin(rng, 0.5)) inst.constraints.push_back(SameScene{});
  if (coin(rng, 0.25)) inst.constraints.push_back(TemporalOverlap{});
  if (m >= 2) {
    auto two = [&] {
      const std::size_t i = pick(rng, 0, m - 1);
      std::size_t j = pick(rng, 0, m - 2);
      if (j >= i) ++j;
      return std::pair{i, j};
    };
    if (coin(rng, 0.4)) {
      const auto [i, j] = two();
      inst.constraints.push_back(NextTo{i, j, uniform(rng, 15, 80)});
    }
    if (coin(rng, 0.3)) {
      const auto [i, j] = two();
      const double lo = uniform(rng, 0, 90);
      inst.constraints.push_back(AngleOnTop{i, j, lo, std::min(180.0, lo + uniform(rng, 20, 120))});
    }
  }
  std::shuffle(inst.constraints.begin(), inst.constraints.end(), rng);
  return inst;
}

std::vector<Trajectory> slow_trajectories(std::uint64_t seed, std::size_t tracks, std::size_t frames,
                                          double step) {
  Rng rng(seed);
  std::vector<Trajectory> out;
  for (std::size_t t = 0; t < tracks; ++t) {
    Trajectory tr;
    tr.scene_id = 0;
    tr.object_id = t;
    tr.class_label = "obj";
    Point2 p{uniform(rng, 0, 200), uniform(rng, 0, 200)};
    const Point2 v{normal(rng, step), normal(rng, step)};
    for (std::size_t f = 0; f < frames; ++f) {
      tr.positions.push_back(p);
      p.x += v.x + normal(rng, 0.1 * step);
      p.y += v.y + normal(rng, 0.1 * step);
    }
    out.push_back(std::move(tr));
  }
  return out;
}

VectorStore filtered_store(std::uint64_t seed, std::size_t n, std::size_t dim, std::size_t groups) {
  if (groups == 0) throw InvalidArgument("filtered_store: need at least one group");
  Rng rng(seed);
  VectorStore store(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = pick(rng, 0, groups - 1);
    Metadata md{{"group", static_cast<std::int64_t>(g)}, {"score", uniform(rng, 0.0, 1.0)}};
    store.add(gaussian(rng, dim), "c" + std::to_string(g), std::move(md));
  }
  return store;
}

EscalationCase two_escalation_case(std::size_t n) {
  if (n < 32) throw InvalidArgument("two_escalation_case needs at least 32 items");
  EscalationCase c;
  c.store = VectorStore(1);
  for (std::size_t i = 0; i < n; ++i) {
    const float x = static_cast<float>(i);
    c.store.add(std::span<const float>(&x, 1));
  }
  c.query = {0.0f};
  // Fetch sizes are 4, 8, 16; two passing items in ranks 8..15 and two far away.
  c.passing = {9, 12, n - 20, n - 5};
  auto passing = std::make_shared<std::set<ItemId>>(c.passing.begin(), c.passing.end());
  c.predicates.push_back(Predicate::make_udf(
      "planted", [passing](ItemId id, EmbeddingView, const Metadata&) { return passing->count(id) > 0; },
      100.0, 0.04));
  return c;
}

}  // namespace simsearch::synthetic
