#pragma once

// Seeded synthetic datasets for experiments, benchmarks and demos. Every
// generator is deterministic for a given seed.

#include <cstdint>
#include <string>
#include <vector>

#include "simsearch/core.hpp"
#include "simsearch/multibody.hpp"
#include "simsearch/planner.hpp"
#include "simsearch/subsequence.hpp"

namespace simsearch::synthetic {

struct ClusterDataset {
  VectorStore store{2};
  Embedding query;
  std::string query_class;
};

// Two 2-D Gaussian clusters labelled "tight" (sigma_tight) and "wide"
// (sigma_wide), centres `separation` apart on the x axis. The query is drawn
// from the edge of the tight cluster (2.5 sigma_tight out) facing the wide one.
ClusterDataset two_clusters(std::uint64_t seed, std::size_t n_each = 500, double sigma_tight = 1.0,
                            double sigma_wide = 3.0, double separation = 7.0);

// Correlated 2-D cloud (correlation rho, unit variances) with the query at
// `extremity` standard deviations along the main diagonal.
ClusterDataset correlated_corner(std::uint64_t seed, std::size_t n = 500, double rho = 0.8,
                                 double extremity = 2.0);

struct SeparableDataset {
  VectorStore store{2};
  std::vector<ItemId> positive_ids;   // class "pos"
  std::vector<ItemId> negative_ids;   // class "neg"
  std::vector<Embedding> positives;
};

// Two isotropic clusters whose centres are `gap` apart in `dim` dimensions
// (unit variance, then clipped to a ball of radius gap/4 around each centre so
// that they are always linearly separable).
SeparableDataset separable_clusters(std::uint64_t seed, std::size_t n_pos = 10, std::size_t n_neg = 200,
                                    std::size_t dim = 8, double gap = 8.0);

// Labelled Gaussian blobs ("c0", "c1", ...) for demos and end-to-end tests.
VectorStore blobs(std::uint64_t seed, std::size_t n, std::size_t dim, std::size_t clusters,
                  double spread = 1.0, double sigma = 0.3);

// Independent per-dimension scales decaying geometrically by `decay`.
VectorStore anisotropic(std::uint64_t seed, std::size_t n, std::size_t dim, double decay = 0.5);

struct TaskLog {
  EventSeries series;
  std::vector<EventSeries> templates;            // one query per task
  std::vector<std::vector<Interval>> instances;  // planted instances per task
};

struct TaskLogParams {
  std::vector<std::size_t> instances_per_task{24, 24, 24};
  std::size_t length = 16;        // events per instance
  std::size_t dim = 6;
  std::size_t min_gap = 4;        // background events between instances
  std::size_t max_gap = 12;
  double prototype_scale = 2.0;   // spread of task prototypes
  double instance_noise = 0.3;
  double background_scale = 1.0;
};

// Background events with planted noisy copies of each task's prototype. The
// template for each task is the noise-free prototype.
TaskLog planted_task_log(std::uint64_t seed, const TaskLogParams& params = {});

// Two tasks with unequal spread: task 0 ("target") instances are tight around
// their prototype, task 1 ("distractor") is a broad family whose prototype sits
// `offset` away per event. The template is a target instance displaced
// towards the distractor.
TaskLog skewed_task_log(std::uint64_t seed, std::size_t n_target = 12, std::size_t n_distractor = 36,
                        double offset = 1.0);

struct MultibodyInstance {
  std::vector<SceneObject> objects;
  MultiQuery query;
  ConstraintSet constraints;
};

// Scenes with four "player" objects and one "ball"; query of two players and
// the ball with the ball slot pinned by class.
MultibodyInstance player_scenes(std::uint64_t seed, std::size_t scenes = 3, std::size_t dim = 8);

// Random small instance: n in [m, max_n], m in [1, max_m], mixed constraints.
MultibodyInstance random_multibody(std::uint64_t seed, std::size_t max_n = 20, std::size_t max_m = 3,
                                   std::size_t dim = 4);

// Slowly drifting tracks in one scene.
std::vector<Trajectory> slow_trajectories(std::uint64_t seed, std::size_t tracks, std::size_t frames,
                                          double step = 0.5);

// Store with integer metadata "group" (0..groups-1), real "score" in [0, 1) and
// class labels "c0".."c{groups-1}" matching the group.
VectorStore filtered_store(std::uint64_t seed, std::size_t n, std::size_t dim, std::size_t groups = 10);

struct EscalationCase {
  VectorStore store{1};
  Embedding query;
  std::size_t k = 2;
  double alpha = 2.0;
  std::vector<ItemId> passing;  // ids accepted by the UDF
  PredicateList predicates;     // a single UDF accepting `passing`
};

// 1-D line of n points (item i at x = i, query at 0), k = 2, alpha = 2. The
// nearest two passing items have ranks 9 and 12, so PostFilter fetches 4, then
// 8, then 16 candidates: exactly two doublings.
EscalationCase two_escalation_case(std::size_t n = 100);

}  // namespace simsearch::synthetic
