#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindspot/error.hpp"

namespace blindspot {

inline constexpr std::string_view kPersonLabel = "person";

// Inclusive pixel rectangle: covers {(x, y) : x1 <= x <= x2, y1 <= y <= y2}.
struct BoundingBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;
  std::string label;
  double confidence = 0.0;

  int width() const noexcept { return x2 - x1 + 1; }
  int height() const noexcept { return y2 - y1 + 1; }
  std::int64_t area() const noexcept {
    return static_cast<std::int64_t>(width()) * height();
  }
  bool is_person() const noexcept { return label == kPersonLabel; }
  bool covers(int x, int y) const noexcept {
    return x >= x1 && x <= x2 && y >= y1 && y <= y2;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Two inclusive rectangles intersect iff they share at least one pixel.
inline bool intersects(const BoundingBox& a, const BoundingBox& b) noexcept {
  return a.x1 <= b.x2 && b.x1 <= a.x2 && a.y1 <= b.y2 && b.y1 <= a.y2;
}

struct Frame {
  std::int64_t frame_index = 0;
  double time_sec = 0.0;
  std::vector<BoundingBox> boxes;

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct Provenance {
  std::string scene_id;
  std::string detector_id;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct DetectionLog {
  Provenance provenance;
  int width = 0;
  int height = 0;
  std::vector<Frame> frames;
  // Set when the confidences were already adjusted by an adaptive threshold.
  bool rescored = false;

  std::size_t box_count() const noexcept {
    std::size_t n = 0;
    for (const auto& f : frames) n += f.boxes.size();
    return n;
  }

  friend bool operator==(const DetectionLog&, const DetectionLog&) = default;
};

inline void check_box(const BoundingBox& b, int width, int height) {
  if (b.x1 < 0 || b.y1 < 0 || b.x1 > b.x2 || b.y1 > b.y2 || b.x2 >= width ||
      b.y2 >= height) {
    throw Error(ErrorKind::out_of_bounds,
                "out-of-bounds box (" + std::to_string(b.x1) + "," + std::to_string(b.y1) +
                    ")-(" + std::to_string(b.x2) + "," + std::to_string(b.y2) + ") in " +
                    std::to_string(width) + "x" + std::to_string(height) + " scene");
  }
  if (!(b.confidence >= 0.0 && b.confidence <= 1.0)) {
    throw Error(ErrorKind::invalid_argument,
                "confidence outside [0,1]: " + std::to_string(b.confidence));
  }
}

// Throws on the first violated invariant.
inline void validate(const DetectionLog& log) {
  if (log.width <= 0 || log.height <= 0) {
    throw Error(ErrorKind::invalid_argument, "scene dimensions must be positive");
  }
  for (std::size_t i = 0; i < log.frames.size(); ++i) {
    const Frame& f = log.frames[i];
    if (f.frame_index < 0 || !(f.time_sec >= 0.0)) {
      throw Error(ErrorKind::invalid_argument, "negative frame_index or time_sec");
    }
    if (i > 0) {
      if (f.frame_index <= log.frames[i - 1].frame_index) {
        throw Error(ErrorKind::invalid_argument, "non-monotonic frame_index");
      }
      if (f.time_sec < log.frames[i - 1].time_sec) {
        throw Error(ErrorKind::invalid_argument, "decreasing time_sec");
      }
    }
    for (const auto& b : f.boxes) check_box(b, log.width, log.height);
  }
}

namespace detail {

using ojson = nlohmann::ordered_json;

[[noreturn]] inline void fail_at(std::size_t line, const std::string& what,
                                 ErrorKind kind = ErrorKind::parse) {
  throw Error(kind, "line " + std::to_string(line) + ": " + what);
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) fail_at(line, std::string("missing field \"") + key + "\"");
  return *it;
}

inline std::int64_t require_int(const nlohmann::json& obj, const char* key, std::size_t line) {
  const auto& v = require(obj, key, line);
  if (!v.is_number_integer()) fail_at(line, std::string("field \"") + key + "\" must be an integer");
  return v.get<std::int64_t>();
}

inline double require_number(const nlohmann::json& obj, const char* key, std::size_t line) {
  const auto& v = require(obj, key, line);
  if (!v.is_number()) fail_at(line, std::string("field \"") + key + "\" must be a number");
  return v.get<double>();
}

inline std::string require_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  const auto& v = require(obj, key, line);
  if (!v.is_string()) fail_at(line, std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

inline int require_coord(const nlohmann::json& obj, const char* key, std::size_t line) {
  const std::int64_t v = require_int(obj, key, line);
  if (v < 0 || v > std::numeric_limits<int>::max()) {
    fail_at(line, "out-of-bounds box", ErrorKind::out_of_bounds);
  }
  return static_cast<int>(v);
}

inline bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

inline ojson header_json(const DetectionLog& log) {
  ojson h;
  h["scene_id"] = log.provenance.scene_id;
  h["detector_id"] = log.provenance.detector_id;
  h["width"] = log.width;
  h["height"] = log.height;
  if (log.rescored) h["lbat"] = true;
  return h;
}

inline ojson box_json(const BoundingBox& b) {
  ojson j;
  j["x1"] = b.x1;
  j["y1"] = b.y1;
  j["x2"] = b.x2;
  j["y2"] = b.y2;
  j["label"] = b.label;
  j["conf"] = b.confidence;
  return j;
}

inline ojson frame_json(const Frame& f) {
  ojson j;
  j["frame_index"] = f.frame_index;
  j["time_sec"] = f.time_sec;
  j["boxes"] = ojson::array();
  return j;
}

}  // namespace detail

// Reads the JSONL wire format: one header object, then one object per frame.
// Blank lines are skipped; unknown fields are ignored.
inline DetectionLog read_log(std::istream& in) {
  DetectionLog log;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;

  while (std::getline(in, text)) {
    ++line;
    if (detail::is_blank(text)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      detail::fail_at(line, std::string("malformed record: ") + e.what());
    }
    if (!j.is_object()) detail::fail_at(line, "record must be a JSON object");

    if (!have_header) {
      log.provenance.scene_id = detail::require_string(j, "scene_id", line);
      log.provenance.detector_id = detail::require_string(j, "detector_id", line);
      const std::int64_t w = detail::require_int(j, "width", line);
      const std::int64_t h = detail::require_int(j, "height", line);
      if (w <= 0 || h <= 0 || w > std::numeric_limits<int>::max() ||
          h > std::numeric_limits<int>::max()) {
        detail::fail_at(line, "width and height must be positive");
      }
      log.width = static_cast<int>(w);
      log.height = static_cast<int>(h);
      if (auto it = j.find("lbat"); it != j.end() && it->is_boolean()) log.rescored = it->get<bool>();
      have_header = true;
      continue;
    }

    Frame frame;
    frame.frame_index = detail::require_int(j, "frame_index", line);
    frame.time_sec = detail::require_number(j, "time_sec", line);
    if (frame.frame_index < 0) detail::fail_at(line, "negative frame_index");
    if (!(frame.time_sec >= 0.0)) detail::fail_at(line, "negative time_sec");
    if (!log.frames.empty()) {
      if (frame.frame_index <= log.frames.back().frame_index) {
        detail::fail_at(line, "non-monotonic frame_index");
      }
      if (frame.time_sec < log.frames.back().time_sec) {
        detail::fail_at(line, "decreasing time_sec");
      }
    }
    const auto& boxes = detail::require(j, "boxes", line);
    if (!boxes.is_array()) detail::fail_at(line, "field \"boxes\" must be an array");
    frame.boxes.reserve(boxes.size());
    for (const auto& jb : boxes) {
      if (!jb.is_object()) detail::fail_at(line, "box must be a JSON object");
      BoundingBox b;
      b.x1 = detail::require_coord(jb, "x1", line);
      b.y1 = detail::require_coord(jb, "y1", line);
      b.x2 = detail::require_coord(jb, "x2", line);
      b.y2 = detail::require_coord(jb, "y2", line);
      b.label = detail::require_string(jb, "label", line);
      b.confidence = detail::require_number(jb, "conf", line);
      try {
        check_box(b, log.width, log.height);
      } catch (const Error& e) {
        detail::fail_at(line, e.what(),
                        e.kind() == ErrorKind::out_of_bounds ? e.kind() : ErrorKind::parse);
      }
      frame.boxes.push_back(std::move(b));
    }
    log.frames.push_back(std::move(frame));
  }
  if (in.bad()) throw Error(ErrorKind::io, "read failure");
  if (!have_header) detail::fail_at(line + 1, "missing header record");
  return log;
}

inline void write_log(const DetectionLog& log, std::ostream& out) {
  validate(log);
  out << detail::header_json(log).dump() << '\n';
  for (const auto& f : log.frames) {
    auto j = detail::frame_json(f);
    for (const auto& b : f.boxes) j["boxes"].push_back(detail::box_json(b));
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failure");
}

inline DetectionLog read_log_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return read_log(in);
}

inline void write_log_file(const DetectionLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_log(log, out);
}

// Keeps only "person" boxes (exact, case-sensitive); frames are retained even if emptied.
inline DetectionLog filter_person(const DetectionLog& log) {
  DetectionLog out;
  out.provenance = log.provenance;
  out.width = log.width;
  out.height = log.height;
  out.rescored = log.rescored;
  out.frames.reserve(log.frames.size());
  for (const auto& f : log.frames) {
    Frame g{f.frame_index, f.time_sec, {}};
    for (const auto& b : f.boxes) {
      if (b.is_person()) g.boxes.push_back(b);
    }
    out.frames.push_back(std::move(g));
  }
  return out;
}

}  // namespace blindspot
