#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <blindspot/blindspot.hpp>

namespace bs_test {

using namespace blindspot;

// Heatmap whose per-pixel mean is `weights[y][x]`; nullopt marks undefined.
inline ConfidenceHeatmap heatmap_from(const std::vector<std::vector<std::optional<double>>>& weights,
                                      Provenance prov = {"scene", "det"}) {
  const int h = static_cast<int>(weights.size());
  const int w = static_cast<int>(weights.front().size());
  ConfidenceHeatmap hc{prov, Grid<double>(w, h, 0.0), Grid<std::uint32_t>(w, h, 0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (const auto& v = weights[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)]) {
        hc.sums(x, y) = *v;
        hc.counts(x, y) = 1;
      }
    }
  }
  return hc;
}

inline ConfidenceHeatmap uniform_heatmap(int w, int h, double v, Provenance prov = {"scene", "det"}) {
  ConfidenceHeatmap hc{prov, Grid<double>(w, h, v), Grid<std::uint32_t>(w, h, 1)};
  return hc;
}

// Random grid: each pixel admissible with probability `density`, weight
// drawn from a small set of levels so ties are common.
inline ConfidenceHeatmap random_heatmap(Rng& rng, int w, int h, double density, int levels = 0) {
  ConfidenceHeatmap hc{{"rand", "det"}, Grid<double>(w, h, 0.0), Grid<std::uint32_t>(w, h, 0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (rng.uniform01() < density) {
        hc.counts(x, y) = 1;
        hc.sums(x, y) = levels > 0 ? (1.0 + static_cast<double>(rng.uniform_index(static_cast<std::size_t>(levels)))) /
                                         static_cast<double>(levels)
                                   : rng.uniform(0.01, 1.0);
      }
    }
  }
  return hc;
}

// Exhaustive minimax over all simple paths: smallest achievable maximum
// weight over the pixels after the start. nullopt when disconnected.
// Branch and bound prunes prefixes that can no longer improve the best.
class MinimaxOracle {
 public:
  explicit MinimaxOracle(const GridGraph& g) : g_(g), on_path_(g.pixel_count(), 0) {}

  std::optional<double> solve(Pixel s, Pixel e) {
    if (!g_.admissible(s) || !g_.admissible(e)) return std::nullopt;
    if (s == e) return 0.0;
    best_ = std::numeric_limits<double>::infinity();
    found_ = false;
    end_ = e;
    on_path_.assign(g_.pixel_count(), 0);
    on_path_[g_.index(s)] = 1;
    dfs(s, 0.0);
    if (!found_) return std::nullopt;
    return best_;
  }

 private:
  void dfs(Pixel u, double prefix_max) {
    for (const Pixel& d : kNeighborOffsets) {
      const Pixel v{u.x + d.x, u.y + d.y};
      if (!g_.in_bounds(v) || !g_.admissible(v)) continue;
      const std::size_t vi = g_.index(v);
      if (on_path_[vi]) continue;
      const double m = std::max(prefix_max, g_.weight(v));
      if (found_ && m >= best_) continue;
      if (v == end_) {
        best_ = m;
        found_ = true;
        continue;
      }
      on_path_[vi] = 1;
      if (can_improve(v)) dfs(v, m);
      on_path_[vi] = 0;
    }
  }

  // Prunes only branches that cannot yield a better path: the end must be
  // reachable from u through off-path pixels lighter than the current best.
  bool can_improve(Pixel u) {
    seen_.assign(g_.pixel_count(), 0);
    stack_.assign(1, u);
    while (!stack_.empty()) {
      const Pixel p = stack_.back();
      stack_.pop_back();
      for (const Pixel& d : kNeighborOffsets) {
        const Pixel v{p.x + d.x, p.y + d.y};
        if (!g_.in_bounds(v) || !g_.admissible(v)) continue;
        const std::size_t vi = g_.index(v);
        if (on_path_[vi] || seen_[vi] || (found_ && g_.weight(v) >= best_)) continue;
        if (v == end_) return true;
        seen_[vi] = 1;
        stack_.push_back(v);
      }
    }
    return false;
  }

  const GridGraph& g_;
  std::vector<std::uint8_t> on_path_;
  std::vector<std::uint8_t> seen_;
  std::vector<Pixel> stack_;
  Pixel end_{};
  double best_ = 0.0;
  bool found_ = false;
};

// Independent minimax check: the smallest weight level L such that end is
// reachable from start through pixels (after the start) of weight <= L.
inline std::optional<double> threshold_minimax(const GridGraph& g, Pixel s, Pixel e) {
  if (!g.admissible(s) || !g.admissible(e)) return std::nullopt;
  if (s == e) return 0.0;
  std::vector<double> levels;
  for (const Pixel& p : g.admissible_pixels()) levels.push_back(g.weight(p));
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  for (double level : levels) {
    std::vector<std::uint8_t> seen(g.pixel_count(), 0);
    std::vector<Pixel> stack{s};
    seen[g.index(s)] = 1;
    while (!stack.empty()) {
      const Pixel u = stack.back();
      stack.pop_back();
      if (u == e) return level;
      for (const Pixel& v : g.neighbors(u)) {
        if (seen[g.index(v)] || g.weight(v) > level) continue;
        seen[g.index(v)] = 1;
        stack.push_back(v);
      }
    }
  }
  return std::nullopt;
}

// Naive accumulation: for every pixel, loop over every person box that
// covers it and add its confidence in the accumulator's fixed-point scale.
inline HeatmapPair naive_heatmaps(const DetectionLog& log) {
  using Fixed = HeatmapAccumulator::Fixed;
  Grid<Fixed> sums(log.width, log.height, 0);
  Grid<std::uint32_t> counts(log.width, log.height, 0);
  for (int y = 0; y < log.height; ++y) {
    for (int x = 0; x < log.width; ++x) {
      for (const auto& f : log.frames) {
        for (const auto& b : f.boxes) {
          if (!b.is_person() || !b.covers(x, y)) continue;
          sums(x, y) += HeatmapAccumulator::to_fixed(b.confidence);
          counts(x, y) += 1;
        }
      }
    }
  }
  HeatmapPair out;
  out.confidence.provenance = log.provenance;
  out.confidence.sums = Grid<double>(log.width, log.height, 0.0);
  out.confidence.counts = counts;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    out.confidence.sums.data()[i] = HeatmapAccumulator::to_double(sums.data()[i]);
  }
  out.detection = {log.provenance, counts};
  return out;
}

// Small random log; labels mix person and other classes.
inline DetectionLog random_log(Rng& rng, int w, int h, int frames, int max_boxes) {
  DetectionLog log;
  log.provenance = {"rand-scene", "rand-det"};
  log.width = w;
  log.height = h;
  for (int k = 0; k < frames; ++k) {
    Frame f{k, k * 0.5, {}};
    const int n = rng.uniform_int(0, max_boxes);
    for (int i = 0; i < n; ++i) {
      BoundingBox b;
      b.x1 = rng.uniform_int(0, w - 1);
      b.y1 = rng.uniform_int(0, h - 1);
      b.x2 = rng.uniform_int(b.x1, w - 1);
      b.y2 = rng.uniform_int(b.y1, h - 1);
      b.label = rng.uniform01() < 0.8 ? "person" : (rng.bernoulli(0.5) ? "car" : "bicycle");
      b.confidence = rng.uniform01() < 0.05 ? 1.0 : rng.uniform(0.01, 1.0);
      f.boxes.push_back(b);
    }
    log.frames.push_back(std::move(f));
  }
  return log;
}

}  // namespace bs_test
