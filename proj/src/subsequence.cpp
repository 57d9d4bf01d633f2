#include "simsearch/subsequence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

#include <json.hpp>

namespace simsearch {

EventSeries::EventSeries(std::vector<Event> events) {
  events_.reserve(events.size());
  for (auto& e : events) push_back(std::move(e));
}

void EventSeries::push_back(Event e) {
  if (e.x.empty()) throw InvalidArgument("event feature must be non-empty");
  if (!events_.empty()) {
    if (e.x.size() != dim()) throw DimensionMismatch(dim(), e.x.size());
    if (e.t_ms < events_.back().t_ms)
      throw InvalidArgument("event timestamps must be non-decreasing");
  }
  for (float v : e.x)
    if (!std::isfinite(v)) throw InvalidArgument("event feature contains a non-finite value");
  events_.push_back(std::move(e));
}

EventSeries EventSeries::slice(std::size_t start, std::size_t length) const {
  if (start + length > size()) throw InvalidArgument("slice exceeds series length");
  return EventSeries(std::vector<Event>(events_.begin() + static_cast<std::ptrdiff_t>(start),
                                        events_.begin() + static_cast<std::ptrdiff_t>(start + length)));
}

double overlap_ratio(const Interval& a, const Interval& b) {
  const std::size_t denom = std::max(a.length, b.length);
  if (denom == 0) return 0.0;
  const std::size_t lo = std::max(a.start, b.start);
  const std::size_t hi = std::min(a.end(), b.end());
  if (hi <= lo) return 0.0;
  return static_cast<double>(hi - lo) / static_cast<double>(denom);
}

double window_distance(const EventSeries& a, std::size_t a_start, const EventSeries& b,
                       std::size_t b_start, std::size_t length, Metric metric) {
  if (length == 0) throw InvalidArgument("window length must be positive");
  if (a_start + length > a.size() || b_start + length > b.size())
    throw InvalidArgument("window exceeds series length");
  double sum = 0.0;
  for (std::size_t i = 0; i < length; ++i)
    sum += distance(a[a_start + i].x, b[b_start + i].x, metric);
  return sum / static_cast<double>(length);
}

namespace {

bool window_before(const WindowHit& a, const WindowHit& b) {
  if (a.score != b.score) return a.score < b.score;
  return a.start < b.start;
}

void check_inputs(const EventSeries& series, const EventSeries& templ, std::size_t stride) {
  if (templ.empty()) throw InvalidArgument("template must contain at least one event");
  if (templ.size() > series.size())
    throw InvalidArgument("template (" + std::to_string(templ.size()) +
                          " events) is longer than the series (" + std::to_string(series.size()) +
                          ")");
  if (stride == 0) throw InvalidArgument("stride must be at least 1");
  if (templ.dim() != series.dim()) throw DimensionMismatch(series.dim(), templ.dim());
}

std::vector<std::size_t> window_starts(std::size_t series_len, std::size_t len, std::size_t stride) {
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + len <= series_len; s += stride) starts.push_back(s);
  return starts;
}

}  // namespace

std::vector<WindowHit> sliding_search(const EventSeries& series, const EventSeries& templ,
                                      std::size_t stride, Metric metric) {
  check_inputs(series, templ, stride);
  const std::size_t len = templ.size();
  std::vector<WindowHit> hits;
  for (std::size_t s : window_starts(series.size(), len, stride))
    hits.push_back({s, len, window_distance(series, s, templ, 0, len, metric)});
  std::sort(hits.begin(), hits.end(), window_before);
  return hits;
}

std::vector<WindowHit> dedup_overlaps(std::vector<WindowHit> hits, double max_ratio) {
  if (!(max_ratio >= 0.0 && max_ratio <= 1.0)) throw InvalidArgument("max_ratio must lie in [0, 1]");
  std::stable_sort(hits.begin(), hits.end(), window_before);
  std::vector<WindowHit> kept;
  for (const auto& h : hits) {
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](const WindowHit& k) {
      return overlap_ratio(k.interval(), h.interval()) > max_ratio;
    });
    if (!clash) kept.push_back(h);
  }
  return kept;
}

RetrievalScore evaluate_retrieval(std::span<const WindowHit> kept,
                                  std::span<const Interval> ground_truth) {
  RetrievalScore r;
  if (kept.empty() && ground_truth.empty()) {
    r.f1 = r.precision = r.recall = r.overlap_ratio = 1.0;
    return r;
  }
  std::vector<WindowHit> order(kept.begin(), kept.end());
  std::stable_sort(order.begin(), order.end(), window_before);

  // Candidate truths are visited in (start, length) order so that the result
  // does not depend on how the ground truth list is ordered.
  std::vector<Interval> truth(ground_truth.begin(), ground_truth.end());
  std::sort(truth.begin(), truth.end(), [](const Interval& a, const Interval& b) {
    return std::tie(a.start, a.length) < std::tie(b.start, b.length);
  });
  std::vector<char> used(truth.size(), 0);
  double overlap_sum = 0.0;
  for (const auto& h : order) {
    std::ptrdiff_t best = -1;
    double best_overlap = kMatchThreshold;
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (used[g]) continue;
      const double o = overlap_ratio(h.interval(), truth[g]);
      if (o > best_overlap) {
        best_overlap = o;
        best = static_cast<std::ptrdiff_t>(g);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = 1;
      ++r.matched;
      overlap_sum += best_overlap;
    }
  }
  const auto tp = static_cast<double>(r.matched);
  r.precision = kept.empty() ? 0.0 : tp / static_cast<double>(kept.size());
  r.recall = truth.empty() ? 0.0 : tp / static_cast<double>(truth.size());
  r.f1 = 2.0 * tp / static_cast<double>(kept.size() + truth.size());
  r.overlap_ratio = r.matched == 0 ? 0.0 : overlap_sum / tp;
  return r;
}

RetrievalMode parse_retrieval_mode(std::string_view name) {
  if (name == "classic") return RetrievalMode::kClassic;
  if (name == "local") return RetrievalMode::kLocal;
  throw InvalidArgument("unknown retrieval mode '" + std::string(name) + "'");
}

std::vector<WindowHit> retrieve_task_instances(const EventSeries& series, const EventSeries& templ,
                                               std::size_t k, RetrievalMode mode,
                                               const RetrievalParams& params) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (mode == RetrievalMode::kClassic) {
    auto kept = dedup_overlaps(sliding_search(series, templ, params.stride, params.metric),
                               params.max_overlap);
    if (kept.size() > k) kept.resize(k);
    return kept;
  }

  check_inputs(series, templ, params.stride);
  const std::size_t len = templ.size();
  const std::vector<std::size_t> starts = window_starts(series.size(), len, params.stride);

  DistanceSource src;
  src.size = starts.size();
  src.id = [&](std::size_t row) { return static_cast<ItemId>(starts[row]); };
  src.to_query = [&](std::size_t row) {
    return window_distance(series, starts[row], templ, 0, len, params.metric);
  };
  src.between = [&](std::size_t a, std::size_t b) {
    return window_distance(series, starts[a], series, starts[b], len, params.metric);
  };
  const ExclusionRule overlapping = [&](ItemId accepted, ItemId candidate) {
    return overlap_ratio({static_cast<std::size_t>(accepted), len},
                         {static_cast<std::size_t>(candidate), len}) > params.max_overlap;
  };

  LocalSearchParams lp;
  lp.k = std::min(k, starts.size());
  lp.lambda = params.lambda;
  lp.batch_size = std::min(params.batch_size, lp.k);
  lp.metric = params.metric;
  std::vector<WindowHit> out;
  for (const auto& hit : iterative_topk(src, lp, overlapping))
    out.push_back({static_cast<std::size_t>(hit.id), len, hit.score});
  return out;
}

EventSeries read_events_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  EventSeries series;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      Event e;
      e.t_ms = j.at("t").get<std::int64_t>();
      e.x = j.at("x").get<Embedding>();
      series.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(FormatErrorCode::kBadPayload, where + ": " + ex.what());
    } catch (const InvalidArgument& ex) {
      throw FormatError(FormatErrorCode::kBadPayload, where + ": " + ex.what());
    }
  }
  return series;
}

void write_events_jsonl(const EventSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatErrorCode::kIo, "cannot write " + path.string());
  for (const auto& e : series.events()) out << nlohmann::json{{"t", e.t_ms}, {"x", e.x}}.dump() << '\n';
  if (!out) throw FormatError(FormatErrorCode::kIo, "short write to " + path.string());
}

}  // namespace simsearch
