#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "blindspot/error.hpp"
#include "blindspot/grid.hpp"
#include "blindspot/heatmap.hpp"
#include "blindspot/rng.hpp"

namespace blindspot {

// Neighbor order used for adjacency enumeration and tie-breaking:
// N, NE, E, SE, S, SW, W, NW (y grows downward).
inline constexpr std::array<Pixel, 8> kNeighborOffsets = {
    {{0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}}};

inline bool adjacent8(Pixel a, Pixel b) noexcept {
  const int dx = a.x - b.x;
  const int dy = a.y - b.y;
  return (dx != 0 || dy != 0) && dx >= -1 && dx <= 1 && dy >= -1 && dy <= 1;
}

// Pixels with at least one detection become nodes weighted by their mean
// confidence; edges join 8-adjacent nodes.
class GridGraph {
 public:
  GridGraph() = default;
  GridGraph(Grid<std::uint8_t> admissible, Grid<double> weight)
      : admissible_(std::move(admissible)), weight_(std::move(weight)) {
    if (admissible_.width() != weight_.width() || admissible_.height() != weight_.height()) {
      throw Error(ErrorKind::invalid_argument, "graph dimension mismatch");
    }
    for (std::size_t i = 0; i < admissible_.size(); ++i) {
      if (admissible_.data()[i]) {
        ++node_count_;
      } else {
        weight_.data()[i] = 0.0;
      }
    }
  }

  int width() const noexcept { return admissible_.width(); }
  int height() const noexcept { return admissible_.height(); }
  std::size_t node_count() const noexcept { return node_count_; }
  bool empty() const noexcept { return node_count_ == 0; }

  bool in_bounds(Pixel p) const noexcept { return admissible_.contains(p); }
  bool admissible(Pixel p) const noexcept { return admissible_.contains(p) && admissible_[p] != 0; }
  double weight(Pixel p) const noexcept { return weight_[p]; }

  std::size_t index(Pixel p) const noexcept { return admissible_.index(p); }
  Pixel pixel(std::size_t idx) const noexcept { return admissible_.pixel(idx); }
  std::size_t pixel_count() const noexcept { return admissible_.size(); }

  // Admissible neighbors in kNeighborOffsets order.
  template <class Fn>
  void for_each_neighbor(Pixel p, Fn&& fn) const {
    for (const Pixel& d : kNeighborOffsets) {
      const Pixel q{p.x + d.x, p.y + d.y};
      if (admissible(q)) fn(q);
    }
  }

  std::vector<Pixel> neighbors(Pixel p) const {
    std::vector<Pixel> out;
    for_each_neighbor(p, [&](Pixel q) { out.push_back(q); });
    return out;
  }

  // Row-major list of admissible pixels.
  std::vector<Pixel> admissible_pixels() const {
    std::vector<Pixel> out;
    out.reserve(node_count_);
    for (std::size_t i = 0; i < admissible_.size(); ++i) {
      if (admissible_.data()[i]) out.push_back(admissible_.pixel(i));
    }
    return out;
  }

 private:
  Grid<std::uint8_t> admissible_;
  Grid<double> weight_;
  std::size_t node_count_ = 0;
};

inline GridGraph build_graph(const ConfidenceHeatmap& hc, const DetectionHeatmap& hd) {
  if (hc.width() != hd.width() || hc.height() != hd.height() ||
      hc.counts.width() != hc.width() || hc.counts.height() != hc.height()) {
    throw Error(ErrorKind::invalid_argument, "dimension mismatch between confidence and detection heatmaps");
  }
  if (hc.provenance != hd.provenance) {
    throw Error(ErrorKind::provenance_mismatch, "confidence and detection heatmaps are not paired");
  }
  Grid<std::uint8_t> admissible(hd.width(), hd.height(), 0);
  Grid<double> weight(hd.width(), hd.height(), 0.0);
  for (int y = 0; y < hd.height(); ++y) {
    for (int x = 0; x < hd.width(); ++x) {
      if (hd.counts(x, y) == 0) continue;
      const auto m = hc.mean(x, y);
      if (!m) {
        throw Error(ErrorKind::invalid_argument, "detection heatmap covers a pixel the confidence heatmap does not");
      }
      admissible(x, y) = 1;
      weight(x, y) = *m;
    }
  }
  return GridGraph(std::move(admissible), std::move(weight));
}

inline GridGraph build_graph(const ConfidenceHeatmap& hc) { return build_graph(hc, detection_of(hc)); }

// ---------------------------------------------------------------------------

enum class PlannerKind { lpet, manhattan, random };

inline std::string_view to_string(PlannerKind k) {
  switch (k) {
    case PlannerKind::lpet: return "lpet";
    case PlannerKind::manhattan: return "manhattan";
    case PlannerKind::random: return "random";
  }
  return "unknown";
}

inline PlannerKind parse_planner(std::string_view name) {
  if (name == "lpet") return PlannerKind::lpet;
  if (name == "manhattan") return PlannerKind::manhattan;
  if (name == "random") return PlannerKind::random;
  throw Error(ErrorKind::invalid_argument, "unknown planner: " + std::string(name));
}

struct PathQuery {
  Pixel start;
  Pixel end;

  friend bool operator==(const PathQuery&, const PathQuery&) = default;
};

struct PathMetrics {
  double bottleneck = 0.0;             // max weight over all pixels, start included
  double bottleneck_excl_start = 0.0;  // max weight over pixels after the start; 0 for one pixel
  double mean_conf = 0.0;              // mean weight over all pixels, repeats counted per visit
};

inline PathMetrics path_metrics(std::span<const double> weights) {
  if (weights.empty()) throw Error(ErrorKind::invalid_argument, "empty path");
  PathMetrics m;
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    m.bottleneck = std::max(m.bottleneck, weights[i]);
    if (i > 0) m.bottleneck_excl_start = std::max(m.bottleneck_excl_start, weights[i]);
    sum += weights[i];
  }
  m.mean_conf = sum / static_cast<double>(weights.size());
  return m;
}

inline PathMetrics path_metrics(const GridGraph& g, std::span<const Pixel> pixels) {
  std::vector<double> w;
  w.reserve(pixels.size());
  for (const Pixel& p : pixels) w.push_back(g.weight(p));
  return path_metrics(w);
}

struct PlannedPath {
  std::vector<Pixel> pixels;
  PathMetrics metrics;
  PlannerKind planner = PlannerKind::lpet;
};

enum class PlanStatus { ok, start_inadmissible, end_inadmissible, no_solution };

inline std::string_view to_string(PlanStatus s) {
  switch (s) {
    case PlanStatus::ok: return "ok";
    case PlanStatus::start_inadmissible: return "StartInadmissible";
    case PlanStatus::end_inadmissible: return "EndInadmissible";
    case PlanStatus::no_solution: return "NoSolution";
  }
  return "unknown";
}

struct PlanResult {
  PlanStatus status = PlanStatus::no_solution;
  PlannedPath path;

  bool ok() const noexcept { return status == PlanStatus::ok; }
  explicit operator bool() const noexcept { return ok(); }
};

namespace detail {

inline PlanResult plan_failure(PlanStatus s) { return PlanResult{s, {}}; }

inline PlanResult plan_success(const GridGraph& g, std::vector<Pixel> pixels, PlannerKind kind) {
  PlanResult r;
  r.status = PlanStatus::ok;
  r.path.metrics = path_metrics(g, pixels);
  r.path.pixels = std::move(pixels);
  r.path.planner = kind;
  return r;
}

inline std::optional<PlanStatus> check_endpoints(const GridGraph& g, const PathQuery& q) {
  if (!g.admissible(q.start)) return PlanStatus::start_inadmissible;
  if (!g.admissible(q.end)) return PlanStatus::end_inadmissible;
  return std::nullopt;
}

inline constexpr std::size_t kNoPrev = std::numeric_limits<std::size_t>::max();

}  // namespace detail

// Single-source minimax labels: dist[v] is the smallest achievable maximum
// node weight over the nodes after the source on any path source -> v, and
// prev[v] the predecessor that achieved it. dist[source] = 0.
struct MinimaxTree {
  std::vector<double> dist;
  std::vector<std::size_t> prev;
};

inline MinimaxTree minimax_tree(const GridGraph& g, Pixel source,
                                std::optional<Pixel> stop_at = std::nullopt) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  MinimaxTree t{std::vector<double>(g.pixel_count(), kInf),
                std::vector<std::size_t>(g.pixel_count(), detail::kNoPrev)};
  if (!g.admissible(source)) return t;

  // Lazy-deletion priority queue; stale entries are skipped on pop.
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  std::vector<std::uint8_t> removed(g.pixel_count(), 0);

  const std::size_t s = g.index(source);
  t.dist[s] = 0.0;
  queue.emplace(0.0, s);
  while (!queue.empty()) {
    const auto [du, u] = queue.top();
    queue.pop();
    if (removed[u] || du != t.dist[u]) continue;
    removed[u] = 1;
    const Pixel pu = g.pixel(u);
    if (stop_at && pu == *stop_at) break;
    g.for_each_neighbor(pu, [&](Pixel pv) {
      const std::size_t v = g.index(pv);
      if (removed[v]) return;
      const double alt = std::min(std::max(t.dist[u], g.weight(pv)), t.dist[v]);
      if (alt < t.dist[v]) {
        t.dist[v] = alt;
        t.prev[v] = u;
        queue.emplace(alt, v);
      }
    });
  }
  return t;
}

// Minimum-bottleneck path from start to end. The optimized objective is the
// maximum weight over every pixel except the start. Among optimal paths the
// one with the smallest weight sum wins, then the fewest hops; remaining ties
// resolve by node index and neighbor order.
inline PlanResult lpet_plan(const GridGraph& g, const PathQuery& q) {
  if (auto bad = detail::check_endpoints(g, q)) return detail::plan_failure(*bad);
  if (q.start == q.end) return detail::plan_success(g, {q.start}, PlannerKind::lpet);

  const MinimaxTree tree = minimax_tree(g, q.start, q.end);
  const std::size_t s = g.index(q.start);
  const std::size_t e = g.index(q.end);
  if (tree.prev[e] == detail::kNoPrev) return detail::plan_failure(PlanStatus::no_solution);
  const double bound = tree.dist[e];

  // Second pass: shortest (sum, hops) path restricted to nodes whose weight
  // does not exceed the optimal bottleneck. Every such path is optimal.
  using Key = std::tuple<double, std::uint32_t, std::size_t>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> queue;
  std::vector<double> sum(g.pixel_count(), std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> hops(g.pixel_count(), std::numeric_limits<std::uint32_t>::max());
  std::vector<std::size_t> prev(g.pixel_count(), detail::kNoPrev);
  std::vector<std::uint8_t> done(g.pixel_count(), 0);
  sum[s] = 0.0;
  hops[s] = 0;
  queue.emplace(0.0, 0u, s);
  while (!queue.empty()) {
    const auto [su, hu, u] = queue.top();
    queue.pop();
    if (done[u] || su != sum[u] || hu != hops[u]) continue;
    done[u] = 1;
    if (u == e) break;
    g.for_each_neighbor(g.pixel(u), [&](Pixel pv) {
      const std::size_t v = g.index(pv);
      const double w = g.weight(pv);
      if (done[v] || v == s || w > bound) return;
      const double alt_sum = su + w;
      const std::uint32_t alt_hops = hu + 1;
      if (alt_sum < sum[v] || (alt_sum == sum[v] && alt_hops < hops[v])) {
        sum[v] = alt_sum;
        hops[v] = alt_hops;
        prev[v] = u;
        queue.emplace(alt_sum, alt_hops, v);
      }
    });
  }
  if (prev[e] == detail::kNoPrev) return detail::plan_failure(PlanStatus::no_solution);

  std::vector<Pixel> pixels;
  for (std::size_t v = e; v != detail::kNoPrev; v = prev[v]) {
    pixels.push_back(g.pixel(v));
    if (v == s) break;
  }
  std::reverse(pixels.begin(), pixels.end());
  return detail::plan_success(g, std::move(pixels), PlannerKind::lpet);
}

// Redraws allowed after the first staircase hits an inadmissible pixel.
inline constexpr int kManhattanRedraws = 64;
// Fresh waypoint sets tried by random_plan before giving up.
inline constexpr int kWaypointRedraws = 16;

namespace detail {

// One uniformly random monotone staircase from a to b (cardinal moves only).
inline std::optional<std::vector<Pixel>> draw_staircase(const GridGraph& g, Pixel a, Pixel b, Rng& rng) {
  const int dx = b.x - a.x;
  const int dy = b.y - a.y;
  std::vector<std::uint8_t> steps;  // 1 = horizontal, 0 = vertical
  steps.insert(steps.end(), static_cast<std::size_t>(std::abs(dx)), 1);
  steps.insert(steps.end(), static_cast<std::size_t>(std::abs(dy)), 0);
  const bool free_choice = dx != 0 && dy != 0;
  const int attempts = free_choice ? 1 + kManhattanRedraws : 1;
  const int sx = dx > 0 ? 1 : -1;
  const int sy = dy > 0 ? 1 : -1;

  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (free_choice) rng.shuffle(steps);
    std::vector<Pixel> path;
    path.reserve(steps.size() + 1);
    Pixel p = a;
    path.push_back(p);
    bool ok = true;
    for (std::uint8_t horizontal : steps) {
      if (horizontal) {
        p.x += sx;
      } else {
        p.y += sy;
      }
      if (!g.admissible(p)) {
        ok = false;
        break;
      }
      path.push_back(p);
    }
    if (ok) return path;
  }
  return std::nullopt;
}

}  // namespace detail

// Random shortest 4-connected path: a uniformly random interleaving of the
// required horizontal and vertical unit steps.
inline PlanResult manhattan_plan(const GridGraph& g, const PathQuery& q, Rng& rng) {
  if (auto bad = detail::check_endpoints(g, q)) return detail::plan_failure(*bad);
  auto path = detail::draw_staircase(g, q.start, q.end, rng);
  if (!path) return detail::plan_failure(PlanStatus::no_solution);
  return detail::plan_success(g, std::move(*path), PlannerKind::manhattan);
}

// Path start -> w1 -> ... -> wk -> end, each leg a random staircase. Junction
// pixels shared by consecutive legs appear once.
inline PlanResult random_plan_via(const GridGraph& g, const PathQuery& q,
                                  std::span<const Pixel> waypoints, Rng& rng) {
  if (auto bad = detail::check_endpoints(g, q)) return detail::plan_failure(*bad);
  std::vector<Pixel> stops;
  stops.reserve(waypoints.size() + 2);
  stops.push_back(q.start);
  stops.insert(stops.end(), waypoints.begin(), waypoints.end());
  stops.push_back(q.end);
  for (const Pixel& w : waypoints) {
    if (!g.admissible(w)) return detail::plan_failure(PlanStatus::no_solution);
  }

  std::vector<Pixel> pixels{q.start};
  for (std::size_t i = 0; i + 1 < stops.size(); ++i) {
    auto leg = detail::draw_staircase(g, stops[i], stops[i + 1], rng);
    if (!leg) return detail::plan_failure(PlanStatus::no_solution);
    pixels.insert(pixels.end(), leg->begin() + 1, leg->end());
  }
  return detail::plan_success(g, std::move(pixels), PlannerKind::random);
}

// Random-waypoint path: k in {1,2,3} uniform, k admissible waypoints uniform.
inline PlanResult random_plan(const GridGraph& g, const PathQuery& q, Rng& rng) {
  if (auto bad = detail::check_endpoints(g, q)) return detail::plan_failure(*bad);
  const std::vector<Pixel> nodes = g.admissible_pixels();
  for (int attempt = 0; attempt < kWaypointRedraws; ++attempt) {
    const int k = rng.uniform_int(1, 3);
    std::vector<Pixel> waypoints;
    for (int i = 0; i < k; ++i) waypoints.push_back(nodes[rng.uniform_index(nodes.size())]);
    PlanResult r = random_plan_via(g, q, waypoints, rng);
    if (r.ok()) return r;
  }
  return detail::plan_failure(PlanStatus::no_solution);
}

inline PlanResult plan(PlannerKind kind, const GridGraph& g, const PathQuery& q, Rng& rng) {
  switch (kind) {
    case PlannerKind::lpet: return lpet_plan(g, q);
    case PlannerKind::manhattan: return manhattan_plan(g, q, rng);
    case PlannerKind::random: return random_plan(g, q, rng);
  }
  throw Error(ErrorKind::invalid_argument, "unknown planner");
}

// True iff pixels form a valid start..end walk over admissible 8-adjacent pixels.
inline bool is_valid_path(const GridGraph& g, const PathQuery& q, std::span<const Pixel> pixels) {
  if (pixels.empty() || pixels.front() != q.start || pixels.back() != q.end) return false;
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (!g.admissible(pixels[i])) return false;
    if (i > 0 && !adjacent8(pixels[i - 1], pixels[i])) return false;
  }
  return true;
}

// {query:{start,end}, planner, pixels:[[x,y],...], bottleneck, bottleneck_excl_start, mean_conf, seed}
inline nlohmann::ordered_json path_to_json(const PathQuery& q, const PlannedPath& p, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["query"]["start"] = {q.start.x, q.start.y};
  j["query"]["end"] = {q.end.x, q.end.y};
  j["planner"] = std::string(to_string(p.planner));
  auto pixels = nlohmann::ordered_json::array();
  for (const Pixel& px : p.pixels) pixels.push_back({px.x, px.y});
  j["pixels"] = std::move(pixels);
  j["bottleneck"] = p.metrics.bottleneck;
  j["bottleneck_excl_start"] = p.metrics.bottleneck_excl_start;
  j["mean_conf"] = p.metrics.mean_conf;
  j["seed"] = seed;
  return j;
}

}  // namespace blindspot
