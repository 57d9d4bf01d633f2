#pragma once

// Sliding-window subsequence retrieval over time-stamped event logs.
//
// A window of length L starting at event s covers indices [s, s + L). Window
// distance is the mean per-event distance between aligned events. Overlap
// between two windows is |index intersection| / max(length).

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "simsearch/core.hpp"
#include "simsearch/local_search.hpp"

namespace simsearch {

struct Event {
  std::int64_t t_ms = 0;
  Embedding x;
};

class EventSeries {
 public:
  EventSeries() = default;
  // Throws InvalidArgument on decreasing timestamps or inconsistent dimension.
  explicit EventSeries(std::vector<Event> events);

  void push_back(Event e);
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  std::size_t dim() const noexcept { return events_.empty() ? 0 : events_.front().x.size(); }
  const Event& operator[](std::size_t i) const { return events_[i]; }
  const std::vector<Event>& events() const noexcept { return events_; }
  EventSeries slice(std::size_t start, std::size_t length) const;

 private:
  std::vector<Event> events_;
};

struct Interval {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t end() const noexcept { return start + length; }
};

struct WindowHit {
  std::size_t start = 0;
  std::size_t length = 0;
  double score = 0.0;

  Interval interval() const noexcept { return {start, length}; }
};

double overlap_ratio(const Interval& a, const Interval& b);

// Mean per-event distance between series[a_start..] and other[b_start..].
double window_distance(const EventSeries& a, std::size_t a_start, const EventSeries& b,
                       std::size_t b_start, std::size_t length, Metric metric);

// One hit per window position 0, stride, 2*stride, ...; sorted ascending by
// (score, start). Throws InvalidArgument when the template is empty or longer
// than the series, or stride is 0.
std::vector<WindowHit> sliding_search(const EventSeries& series, const EventSeries& templ,
                                      std::size_t stride, Metric metric = Metric::kEuclidean);

// Greedy in ascending (score, start) order; drops a hit whose overlap with any
// kept hit exceeds max_ratio. Output keeps that order.
std::vector<WindowHit> dedup_overlaps(std::vector<WindowHit> hits, double max_ratio);

inline constexpr double kDefaultMaxOverlap = 0.10;
inline constexpr double kMatchThreshold = 0.5;

struct RetrievalScore {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double overlap_ratio = 0.0;  // mean over matched pairs, 0 when none matched
  std::size_t matched = 0;
};

// Hits are matched greedily in (score, start) order to the unmatched
// ground-truth interval of highest overlap (> kMatchThreshold). f1 is
// 2*matched / (|kept| + |truth|), so it equals precision and recall whenever
// |kept| == |truth|. Both lists empty scores 1.
RetrievalScore evaluate_retrieval(std::span<const WindowHit> kept,
                                  std::span<const Interval> ground_truth);

enum class RetrievalMode { kClassic, kLocal };
RetrievalMode parse_retrieval_mode(std::string_view name);

struct RetrievalParams {
  std::size_t stride = 1;
  double lambda = 0.9;      // local mode only
  std::size_t batch_size = 1;
  double max_overlap = kDefaultMaxOverlap;
  Metric metric = Metric::kEuclidean;
};

// classic: windows by distance to the template, overlap-deduplicated, first k.
// local: windows fed to iterative_topk with overlapping windows excluded once
// one is accepted, so the expanded query set never holds shifted copies.
// Returns at most k hits in selection order.
std::vector<WindowHit> retrieve_task_instances(const EventSeries& series, const EventSeries& templ,
                                               std::size_t k, RetrievalMode mode,
                                               const RetrievalParams& params = {});

// One {"t": ms, "x": [...]} object per line.
EventSeries read_events_jsonl(const std::filesystem::path& path);
void write_events_jsonl(const EventSeries& series, const std::filesystem::path& path);

}  // namespace simsearch
