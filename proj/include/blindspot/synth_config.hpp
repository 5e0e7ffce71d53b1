#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blindspot/error.hpp"
#include "blindspot/synth.hpp"

namespace blindspot {

// Scene config files are TOML-like:
//
//   preset = "corridor-occluded"   # optional starting point
//   [scene]
//   scene_id = "my-scene"
//   occluders = [[270, 200, 370, 290]]
//   [model]
//   angle_penalty = [1.0, 0.85, 0.65, 0.85, 0.95, 0.85, 0.65, 0.85]
//   [track]                        # each [track] adds one pedestrian
//   waypoints = [[16, 150], [623, 150]]
//   speed = 40
//
// Values are JSON literals. Tracks given in the file replace the preset's.

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a trailing # comment that is not inside a string literal.
inline std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

template <class T>
T config_value(const nlohmann::json& v, std::size_t line, std::string_view key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": bad value for '" + std::string(key) + "'");
  }
}

inline void apply_scene_key(SceneSpec& s, std::string_view key, const nlohmann::json& v, std::size_t line) {
  if (key == "scene_id") s.scene_id = config_value<std::string>(v, line, key);
  else if (key == "width") s.width = config_value<int>(v, line, key);
  else if (key == "height") s.height = config_value<int>(v, line, key);
  else if (key == "camera_height_m") s.camera_height_m = config_value<double>(v, line, key);
  else if (key == "ambient_light") s.ambient_light = config_value<double>(v, line, key);
  else if (key == "duration_sec") s.duration_sec = config_value<double>(v, line, key);
  else if (key == "sample_period_sec") s.sample_period_sec = config_value<double>(v, line, key);
  else if (key == "far_box_scale") s.far_box_scale = config_value<double>(v, line, key);
  else if (key == "seed") s.seed = config_value<std::uint64_t>(v, line, key);
  else if (key == "occluders") {
    s.occluders.clear();
    for (const auto& r : config_value<std::vector<std::array<int, 4>>>(v, line, key)) {
      s.occluders.push_back({r[0], r[1], r[2], r[3]});
    }
  } else {
    throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": unknown [scene] key '" + std::string(key) + "'");
  }
}

inline void apply_model_key(ConfidenceModel& m, std::string_view key, const nlohmann::json& v, std::size_t line) {
  if (key == "detector_id") m.detector_id = config_value<std::string>(v, line, key);
  else if (key == "base_conf") m.base_conf = config_value<double>(v, line, key);
  else if (key == "angle_penalty") m.angle_penalty = config_value<std::array<double, 8>>(v, line, key);
  else if (key == "far_distance_penalty") m.far_distance_penalty = config_value<double>(v, line, key);
  else if (key == "height_table") m.height_table = config_value<std::vector<std::pair<double, double>>>(v, line, key);
  else if (key == "light_floor") m.light_floor = config_value<double>(v, line, key);
  else if (key == "occlusion_penalty") m.occlusion_penalty = config_value<double>(v, line, key);
  else if (key == "noise_sigma") m.noise_sigma = config_value<double>(v, line, key);
  else if (key == "drop_threshold") m.drop_threshold = config_value<double>(v, line, key);
  else if (key == "false_positive_rate") m.false_positive_rate = config_value<double>(v, line, key);
  else if (key == "false_positive_max_conf") m.false_positive_max_conf = config_value<double>(v, line, key);
  else {
    throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": unknown [model] key '" + std::string(key) + "'");
  }
}

inline void apply_track_key(PedestrianTrack& t, std::string_view key, const nlohmann::json& v, std::size_t line) {
  if (key == "waypoints") {
    t.waypoints.clear();
    for (const auto& p : config_value<std::vector<std::array<double, 2>>>(v, line, key)) {
      t.waypoints.push_back({p[0], p[1]});
    }
  } else if (key == "speed") t.speed = config_value<double>(v, line, key);
  else if (key == "start_sec") t.start_sec = config_value<double>(v, line, key);
  else if (key == "loop") t.loop = config_value<bool>(v, line, key);
  else if (key == "facing_deg") t.facing_deg = config_value<double>(v, line, key);
  else if (key == "box_width") t.box_width = config_value<int>(v, line, key);
  else if (key == "box_height") t.box_height = config_value<int>(v, line, key);
  else {
    throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": unknown [track] key '" + std::string(key) + "'");
  }
}

}  // namespace detail

inline ScenePreset read_scene_config(std::istream& in) {
  enum class Section { top, scene, model, track };
  struct Entry {
    Section section;
    std::size_t track;
    std::string key;
    nlohmann::json value;
    std::size_t line;
  };

  std::vector<Entry> entries;
  std::optional<std::string> preset;
  Section section = Section::top;
  std::size_t tracks = 0;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view s = detail::trim(detail::strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s == "[scene]") section = Section::scene;
      else if (s == "[model]") section = Section::model;
      else if (s == "[track]") {
        section = Section::track;
        ++tracks;
      } else {
        throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": unknown section " + std::string(s));
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": expected key = value");
    }
    const std::string key(detail::trim(s.substr(0, eq)));
    const std::string_view text = detail::trim(s.substr(eq + 1));
    if (key.empty() || text.empty()) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": expected key = value");
    }
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": malformed value for '" + key + "'");
    }
    if (section == Section::top) {
      if (key != "preset") {
        throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": only 'preset' may precede a section");
      }
      preset = detail::config_value<std::string>(value, line, key);
      continue;
    }
    entries.push_back({section, tracks, key, std::move(value), line});
  }
  if (in.bad()) throw Error(ErrorKind::io, "read failure");

  ScenePreset out = preset ? preset_scene(*preset) : ScenePreset{};
  if (tracks > 0) out.tracks.assign(tracks, PedestrianTrack{});
  for (const auto& e : entries) {
    switch (e.section) {
      case Section::scene: detail::apply_scene_key(out.spec, e.key, e.value, e.line); break;
      case Section::model: detail::apply_model_key(out.model, e.key, e.value, e.line); break;
      case Section::track: detail::apply_track_key(out.tracks[e.track - 1], e.key, e.value, e.line); break;
      case Section::top: break;
    }
  }
  validate(out.spec);
  validate(out.model);
  for (const auto& t : out.tracks) validate(t, out.spec);
  return out;
}

inline ScenePreset read_scene_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return read_scene_config(in);
}

}  // namespace blindspot
