#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "blindspot/detlog.hpp"
#include "blindspot/error.hpp"
#include "blindspot/rng.hpp"

namespace blindspot {

struct Rect {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  friend bool operator==(const Rect&, const Rect&) = default;
};

struct PointF {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PointF&, const PointF&) = default;
};

struct SceneSpec {
  std::string scene_id = "synthetic";
  int width = 640;
  int height = 360;
  double camera_height_m = 1.8;
  double ambient_light = 1.0;  // 1 = full daylight, 0 = dark
  std::vector<Rect> occluders;
  double duration_sec = 3600.0;
  double sample_period_sec = 2.0;
  // Box scale of a pedestrian at the top row relative to the bottom row.
  double far_box_scale = 0.45;
  std::uint64_t seed = 0;
};

// A pedestrian walking a polyline at constant speed. The anchor point is the
// bottom-center of the person box (the feet). Looping tracks walk back and
// forth; otherwise the pedestrian leaves once the last waypoint is reached.
struct PedestrianTrack {
  std::vector<PointF> waypoints;
  double speed = 40.0;  // pixels per second
  double start_sec = 0.0;
  bool loop = true;
  double facing_deg = 0.0;  // orientation of a stationary (single-waypoint) pedestrian
  int box_width = 26;       // at the bottom row
  int box_height = 70;

  friend bool operator==(const PedestrianTrack&, const PedestrianTrack&) = default;
};

// Multiplicative confidence model:
//   conf = clamp01(base * angle * distance * height * light * occlusion + noise)
// Angles: 0 = facing the camera, 90 / 270 = side-on (perpendicular).
struct ConfidenceModel {
  std::string detector_id = "synthetic-detector";
  double base_conf = 0.92;
  std::array<double, 8> angle_penalty = {1.0, 0.85, 0.65, 0.85, 0.95, 0.85, 0.65, 0.85};
  double far_distance_penalty = 0.7;  // multiplier at the farthest (top) row
  // (camera height in meters, multiplier), interpolated linearly and clamped at the ends.
  std::vector<std::pair<double, double>> height_table = {{0.6, 0.85}, {1.8, 1.0}, {2.4, 0.97}};
  double light_floor = 2.0 / 3.0;  // multiplier at ambient_light = 0
  double occlusion_penalty = 0.5;
  double noise_sigma = 0.03;
  double drop_threshold = 0.05;  // detections below this are missed entirely
  // Spurious person boxes per frame (Poisson mean) with confidence uniform in
  // [drop_threshold, false_positive_max_conf).
  double false_positive_rate = 0.0;
  double false_positive_max_conf = 0.45;

  static std::size_t angle_bin(double angle_deg) noexcept {
    double a = std::fmod(angle_deg, 360.0);
    if (a < 0) a += 360.0;
    return static_cast<std::size_t>(std::lround(a / 45.0)) % 8;
  }
  double angle_factor(double angle_deg) const noexcept { return angle_penalty[angle_bin(angle_deg)]; }

  // distance in [0, 1]: 0 at the bottom row (nearest), 1 at the top row.
  double distance_factor(double distance) const noexcept {
    const double d = std::clamp(distance, 0.0, 1.0);
    return 1.0 - (1.0 - far_distance_penalty) * d;
  }

  double height_factor(double camera_height_m) const noexcept {
    if (height_table.empty()) return 1.0;
    if (camera_height_m <= height_table.front().first) return height_table.front().second;
    if (camera_height_m >= height_table.back().first) return height_table.back().second;
    for (std::size_t i = 1; i < height_table.size(); ++i) {
      const auto [h1, m1] = height_table[i];
      if (camera_height_m <= h1) {
        const auto [h0, m0] = height_table[i - 1];
        const double f = (camera_height_m - h0) / (h1 - h0);
        return m0 + (m1 - m0) * f;
      }
    }
    return height_table.back().second;
  }

  double light_factor(double ambient_light) const noexcept {
    return light_floor + (1.0 - light_floor) * std::clamp(ambient_light, 0.0, 1.0);
  }
};

namespace detail {

inline bool in_unit_interval(double v) { return v > 0.0 && v <= 1.0; }

}  // namespace detail

inline void validate(const SceneSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) {
    throw Error(ErrorKind::invalid_argument, "scene dimensions must be positive");
  }
  if (!(spec.sample_period_sec > 0.0)) throw Error(ErrorKind::invalid_argument, "sample_period_sec must be positive");
  if (!(spec.duration_sec >= 0.0)) throw Error(ErrorKind::invalid_argument, "duration_sec must be non-negative");
  if (!(spec.ambient_light >= 0.0 && spec.ambient_light <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "ambient_light must lie in [0,1]");
  }
  if (!(spec.camera_height_m > 0.0)) throw Error(ErrorKind::invalid_argument, "camera_height_m must be positive");
  if (!detail::in_unit_interval(spec.far_box_scale)) {
    throw Error(ErrorKind::invalid_argument, "far_box_scale must lie in (0,1]");
  }
  for (const Rect& r : spec.occluders) {
    if (r.x1 < 0 || r.y1 < 0 || r.x1 > r.x2 || r.y1 > r.y2 || r.x2 >= spec.width || r.y2 >= spec.height) {
      throw Error(ErrorKind::invalid_argument, "occluder outside the scene");
    }
  }
}

inline void validate(const PedestrianTrack& t, const SceneSpec& spec) {
  if (t.waypoints.empty()) throw Error(ErrorKind::invalid_argument, "track needs at least one waypoint");
  if (!(t.speed > 0.0)) throw Error(ErrorKind::invalid_argument, "track speed must be positive");
  if (t.box_width <= 0 || t.box_height <= 0) throw Error(ErrorKind::invalid_argument, "box size must be positive");
  for (const PointF& p : t.waypoints) {
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= spec.width - 1 && p.y <= spec.height - 1)) {
      throw Error(ErrorKind::invalid_argument, "waypoint outside the scene");
    }
  }
}

inline void validate(const ConfidenceModel& m) {
  if (!(m.base_conf >= 0.0 && m.base_conf <= 1.0)) throw Error(ErrorKind::invalid_argument, "base_conf must lie in [0,1]");
  for (double a : m.angle_penalty) {
    if (!detail::in_unit_interval(a)) throw Error(ErrorKind::invalid_argument, "angle penalties must lie in (0,1]");
  }
  const double perpendicular = std::max(m.angle_penalty[2], m.angle_penalty[6]);
  for (std::size_t i : {0u, 1u, 3u, 4u, 5u, 7u}) {
    if (m.angle_penalty[i] < perpendicular) {
      throw Error(ErrorKind::invalid_argument, "angle penalty must be smallest at the 90 and 270 degree bins");
    }
  }
  if (!detail::in_unit_interval(m.far_distance_penalty) || !detail::in_unit_interval(m.light_floor) ||
      !detail::in_unit_interval(m.occlusion_penalty)) {
    throw Error(ErrorKind::invalid_argument, "multipliers must lie in (0,1]");
  }
  for (std::size_t i = 0; i < m.height_table.size(); ++i) {
    if (!detail::in_unit_interval(m.height_table[i].second)) {
      throw Error(ErrorKind::invalid_argument, "height multipliers must lie in (0,1]");
    }
    if (i > 0 && !(m.height_table[i].first > m.height_table[i - 1].first)) {
      throw Error(ErrorKind::invalid_argument, "height table must be sorted by height");
    }
  }
  if (!(m.noise_sigma >= 0.0)) throw Error(ErrorKind::invalid_argument, "noise_sigma must be non-negative");
  if (!(m.drop_threshold >= 0.0 && m.drop_threshold < 1.0)) {
    throw Error(ErrorKind::invalid_argument, "drop_threshold must lie in [0,1)");
  }
  if (!(m.false_positive_rate >= 0.0)) throw Error(ErrorKind::invalid_argument, "false_positive_rate must be non-negative");
  if (!(m.false_positive_max_conf >= m.drop_threshold && m.false_positive_max_conf <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "false_positive_max_conf must lie in [drop_threshold, 1]");
  }
}

// Where a pedestrian is at a given time and which way it faces.
struct PedestrianState {
  PointF position;
  double body_angle_deg = 0.0;
};

// Body angle relative to the camera from an image-plane motion direction:
// walking down the frame (toward the camera) is 0, rightward 90, away 180.
inline double body_angle_from_motion(double dx, double dy) {
  double a = std::atan2(dx, dy) * 180.0 / std::numbers::pi;
  if (a < 0) a += 360.0;
  return a;
}

inline std::optional<PedestrianState> track_state(const PedestrianTrack& t, double time_sec) {
  if (time_sec < t.start_sec) return std::nullopt;
  if (t.waypoints.size() == 1) return PedestrianState{t.waypoints.front(), t.facing_deg};

  std::vector<double> seg;
  double total = 0.0;
  for (std::size_t i = 1; i < t.waypoints.size(); ++i) {
    const double len = std::hypot(t.waypoints[i].x - t.waypoints[i - 1].x, t.waypoints[i].y - t.waypoints[i - 1].y);
    seg.push_back(len);
    total += len;
  }
  if (total <= 0.0) return PedestrianState{t.waypoints.front(), t.facing_deg};

  double s = (time_sec - t.start_sec) * t.speed;
  bool reverse = false;
  if (t.loop) {
    s = std::fmod(s, 2.0 * total);
    if (s > total) {
      s = 2.0 * total - s;
      reverse = true;
    }
  } else if (s > total) {
    return std::nullopt;
  }

  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (s <= seg[i] || i + 1 == seg.size()) {
      const PointF a = t.waypoints[i];
      const PointF b = t.waypoints[i + 1];
      const double f = seg[i] > 0.0 ? std::clamp(s / seg[i], 0.0, 1.0) : 0.0;
      double dx = b.x - a.x;
      double dy = b.y - a.y;
      if (reverse) {
        dx = -dx;
        dy = -dy;
      }
      return PedestrianState{{a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f}, body_angle_from_motion(dx, dy)};
    }
    s -= seg[i];
  }
  return PedestrianState{t.waypoints.back(), t.facing_deg};
}

// Box of a pedestrian whose feet are at `feet`, scaled by distance and clipped
// to the scene. nullopt when nothing of it is in view.
inline std::optional<BoundingBox> pedestrian_box(const SceneSpec& spec, const PedestrianTrack& t, PointF feet) {
  const double distance = 1.0 - feet.y / static_cast<double>(spec.height - 1 > 0 ? spec.height - 1 : 1);
  const double scale = 1.0 - (1.0 - spec.far_box_scale) * std::clamp(distance, 0.0, 1.0);
  const int w = std::max(1, static_cast<int>(std::lround(t.box_width * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(t.box_height * scale)));
  const int cx = static_cast<int>(std::lround(feet.x));
  BoundingBox b;
  b.x1 = std::max(0, cx - w / 2);
  b.x2 = std::min(spec.width - 1, cx - w / 2 + w - 1);
  b.y2 = std::min(spec.height - 1, static_cast<int>(std::lround(feet.y)));
  b.y1 = std::max(0, b.y2 - h + 1);
  if (b.x1 > b.x2 || b.y1 > b.y2) return std::nullopt;
  b.label = std::string(kPersonLabel);
  return b;
}

inline double scene_distance(const SceneSpec& spec, double feet_y) {
  return std::clamp(1.0 - feet_y / static_cast<double>(std::max(1, spec.height - 1)), 0.0, 1.0);
}

inline bool overlaps_occluder(const SceneSpec& spec, const BoundingBox& b) {
  return std::any_of(spec.occluders.begin(), spec.occluders.end(), [&](const Rect& r) {
    return b.x1 <= r.x2 && r.x1 <= b.x2 && b.y1 <= r.y2 && r.y1 <= b.y2;
  });
}

// Noise-free confidence of a pedestrian box.
inline double expected_confidence(const SceneSpec& spec, const ConfidenceModel& m, const BoundingBox& box,
                                  double feet_y, double body_angle_deg) {
  double c = m.base_conf * m.angle_factor(body_angle_deg) * m.distance_factor(scene_distance(spec, feet_y)) *
             m.height_factor(spec.camera_height_m) * m.light_factor(spec.ambient_light);
  if (overlaps_occluder(spec, box)) c *= m.occlusion_penalty;
  return c;
}

inline std::size_t frame_count(const SceneSpec& spec) {
  return static_cast<std::size_t>(std::floor(spec.duration_sec / spec.sample_period_sec + 1e-9));
}

// One frame per sample period. Deterministic in (spec, tracks, model).
inline DetectionLog simulate(const SceneSpec& spec, const std::vector<PedestrianTrack>& tracks,
                             const ConfidenceModel& model) {
  validate(spec);
  validate(model);
  for (const auto& t : tracks) validate(t, spec);

  DetectionLog log;
  log.provenance = {spec.scene_id, model.detector_id};
  log.width = spec.width;
  log.height = spec.height;

  Rng noise(derive_seed(spec.seed, "synth:noise"));
  Rng clutter(derive_seed(spec.seed, "synth:clutter"));
  const std::size_t n = frame_count(spec);
  log.frames.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Frame frame;
    frame.frame_index = static_cast<std::int64_t>(k);
    frame.time_sec = static_cast<double>(k) * spec.sample_period_sec;
    for (const auto& t : tracks) {
      const auto state = track_state(t, frame.time_sec);
      if (!state) continue;
      auto box = pedestrian_box(spec, t, state->position);
      if (!box) continue;
      // Drawn for every visible pedestrian so streams line up across parameter changes.
      const double eps = noise.normal(0.0, 1.0) * model.noise_sigma;
      const double c = std::clamp(
          expected_confidence(spec, model, *box, state->position.y, state->body_angle_deg) + eps, 0.0, 1.0);
      if (c < model.drop_threshold) continue;
      box->confidence = c;
      frame.boxes.push_back(std::move(*box));
    }
    const int spurious = clutter.poisson(model.false_positive_rate);
    for (int i = 0; i < spurious; ++i) {
      PedestrianTrack shape;
      const PointF feet{clutter.uniform(0.0, spec.width - 1), clutter.uniform(0.0, spec.height - 1)};
      auto box = pedestrian_box(spec, shape, feet);
      const double c = clutter.uniform(model.drop_threshold, model.false_positive_max_conf);
      if (!box) continue;
      box->confidence = c;
      frame.boxes.push_back(std::move(*box));
    }
    log.frames.push_back(std::move(frame));
  }
  return log;
}

// ---------------------------------------------------------------------------
// Presets. All use seed 0 unless overridden; the night variant shares the
// day geometry and tracks.

struct ScenePreset {
  SceneSpec spec;
  std::vector<PedestrianTrack> tracks;
  ConfidenceModel model;
};

inline constexpr std::array<std::string_view, 3> kPresetNames = {"crossing-day", "crossing-night",
                                                                 "corridor-occluded"};

namespace detail {

// Twelve pedestrians wandering the plaza along fixed random polylines.
inline std::vector<PedestrianTrack> crossing_tracks(int width, int height) {
  Rng rng(derive_seed(0, "preset:crossing:tracks"));
  std::vector<PedestrianTrack> tracks;
  for (int i = 0; i < 12; ++i) {
    PedestrianTrack t;
    const int points = rng.uniform_int(6, 10);
    for (int p = 0; p < points; ++p) {
      t.waypoints.push_back({rng.uniform(16.0, width - 17.0), rng.uniform(height * 0.2, height - 1.0)});
    }
    t.speed = rng.uniform(25.0, 55.0);
    t.start_sec = rng.uniform(0.0, 60.0);
    t.box_width = rng.uniform_int(22, 30);
    t.box_height = rng.uniform_int(62, 78);
    tracks.push_back(std::move(t));
  }
  return tracks;
}

// A corridor crossed mostly side-on, with two vertical walkways and a pillar
// block in the middle.
inline std::vector<PedestrianTrack> corridor_tracks(int width, int height) {
  Rng rng(derive_seed(0, "preset:corridor:tracks"));
  std::vector<PedestrianTrack> tracks;
  const double lanes[] = {150.0, 185.0, 215.0, 245.0, 275.0, 305.0, 335.0, 355.0};
  for (double lane : lanes) {
    PedestrianTrack t;
    t.waypoints = {{16.0, lane + rng.uniform(-6.0, 6.0)},
                   {width * 0.5, lane + rng.uniform(-10.0, 10.0)},
                   {width - 17.0, lane + rng.uniform(-6.0, 6.0)}};
    t.speed = rng.uniform(30.0, 60.0);
    t.start_sec = rng.uniform(0.0, 30.0);
    tracks.push_back(std::move(t));
  }
  // Walkways toward and away from the camera.
  const double columns[] = {90.0, 200.0, 450.0, 560.0};
  for (double col : columns) {
    PedestrianTrack t;
    t.waypoints = {{col, 140.0}, {col + rng.uniform(-12.0, 12.0), height - 1.0}};
    t.speed = rng.uniform(25.0, 45.0);
    t.start_sec = rng.uniform(0.0, 30.0);
    tracks.push_back(std::move(t));
  }
  return tracks;
}

inline ConfidenceModel preset_model() {
  ConfidenceModel m;
  m.detector_id = "synthetic-detector";
  m.false_positive_rate = 0.3;
  return m;
}

}  // namespace detail

inline ScenePreset preset_scene(std::string_view name) {
  ScenePreset p;
  p.model = detail::preset_model();
  if (name == "crossing-day" || name == "crossing-night") {
    p.spec.scene_id = std::string(name);
    p.spec.width = 640;
    p.spec.height = 360;
    p.spec.camera_height_m = 2.4;
    p.spec.ambient_light = name == "crossing-day" ? 1.0 : 0.25;
    p.spec.duration_sec = 3600.0;
    p.tracks = detail::crossing_tracks(p.spec.width, p.spec.height);
    return p;
  }
  if (name == "corridor-occluded") {
    p.spec.scene_id = std::string(name);
    p.spec.width = 640;
    p.spec.height = 360;
    p.spec.camera_height_m = 2.4;
    p.spec.ambient_light = 1.0;
    p.spec.duration_sec = 3600.0;
    p.spec.occluders = {{270, 200, 370, 290}};
    p.tracks = detail::corridor_tracks(p.spec.width, p.spec.height);
    return p;
  }
  throw Error(ErrorKind::invalid_argument, "unknown preset: " + std::string(name));
}

}  // namespace blindspot
