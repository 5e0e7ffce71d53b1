#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "blindspot/detlog.hpp"
#include "blindspot/error.hpp"
#include "blindspot/heatmap.hpp"

namespace blindspot {

// A person detection after location-based rescaling. box.confidence holds
// new_conf.
struct RescoredDetection {
  BoundingBox box;
  double original_conf = 0.0;
  std::optional<double> local_mean;  // undefined when no pixel under the box has detections
  double new_conf = 0.0;

  friend bool operator==(const RescoredDetection&, const RescoredDetection&) = default;
};

// Mean of the per-pixel heatmap means over the defined pixels under the box.
inline std::optional<double> local_mean(const BoundingBox& box, const ConfidenceHeatmap& hc) {
  check_box(box, hc.width(), hc.height());
  double total = 0.0;
  std::uint64_t n = 0;
  for (int y = box.y1; y <= box.y2; ++y) {
    for (int x = box.x1; x <= box.x2; ++x) {
      if (auto m = hc.mean(x, y)) {
        total += *m;
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

// new_conf = min(1, c / t) with t the local mean; boxes over undefined
// pixels only pass through unchanged.
inline RescoredDetection rescore(const BoundingBox& box, const ConfidenceHeatmap& hc) {
  if (!box.is_person()) {
    throw Error(ErrorKind::invalid_argument, "only person boxes can be rescored, got \"" + box.label + "\"");
  }
  RescoredDetection r;
  r.box = box;
  r.original_conf = box.confidence;
  r.local_mean = local_mean(box, hc);
  if (!r.local_mean) {
    r.new_conf = box.confidence;
  } else {
    if (!(*r.local_mean > 0.0)) {
      throw Error(ErrorKind::invalid_argument, "local heatmap mean is zero; cannot rescale");
    }
    r.new_conf = std::min(1.0, box.confidence / *r.local_mean);
  }
  r.box.confidence = r.new_conf;
  return r;
}

// One result per person box, in order; other labels are dropped.
inline std::vector<RescoredDetection> rescore_frame(const Frame& frame, const ConfidenceHeatmap& hc) {
  std::vector<RescoredDetection> out;
  for (const auto& b : frame.boxes) {
    if (b.is_person()) out.push_back(rescore(b, hc));
  }
  return out;
}

struct RescoredFrame {
  std::int64_t frame_index = 0;
  double time_sec = 0.0;
  std::vector<RescoredDetection> detections;
};

struct RescoredLog {
  Provenance provenance;          // of the rescored detections
  Provenance heatmap_provenance;  // of the heatmap used for rescaling
  int width = 0;
  int height = 0;
  std::vector<RescoredFrame> frames;

  // Plain log view with confidences replaced by new_conf.
  DetectionLog as_detection_log() const {
    DetectionLog log;
    log.provenance = provenance;
    log.width = width;
    log.height = height;
    log.rescored = true;
    log.frames.reserve(frames.size());
    for (const auto& f : frames) {
      Frame g{f.frame_index, f.time_sec, {}};
      g.boxes.reserve(f.detections.size());
      for (const auto& d : f.detections) g.boxes.push_back(d.box);
      log.frames.push_back(std::move(g));
    }
    return log;
  }
};

// Rescales every person detection of an original (not yet rescored) log. The
// heatmap must describe the same scene and detector.
inline RescoredLog rescore_log(const DetectionLog& log, const ConfidenceHeatmap& hc) {
  if (log.rescored) {
    throw Error(ErrorKind::invalid_argument, "log is already rescored; rescoring consumes original logs only");
  }
  if (log.provenance != hc.provenance) {
    throw Error(ErrorKind::provenance_mismatch,
                "heatmap (" + hc.provenance.scene_id + "/" + hc.provenance.detector_id +
                    ") does not match log (" + log.provenance.scene_id + "/" +
                    log.provenance.detector_id + ")");
  }
  if (log.width != hc.width() || log.height != hc.height()) {
    throw Error(ErrorKind::invalid_argument, "heatmap dimensions differ from the log's scene");
  }
  RescoredLog out;
  out.provenance = log.provenance;
  out.heatmap_provenance = hc.provenance;
  out.width = log.width;
  out.height = log.height;
  out.frames.reserve(log.frames.size());
  for (const auto& f : log.frames) {
    out.frames.push_back({f.frame_index, f.time_sec, rescore_frame(f, hc)});
  }
  return out;
}

// Detection log JSONL plus "lbat": true and the heatmap provenance in the
// header, and original_conf / local_mean (null if undefined) on every box.
inline void write_rescored_log(const RescoredLog& log, std::ostream& out) {
  using ojson = nlohmann::ordered_json;
  ojson h;
  h["scene_id"] = log.provenance.scene_id;
  h["detector_id"] = log.provenance.detector_id;
  h["width"] = log.width;
  h["height"] = log.height;
  h["lbat"] = true;
  h["heatmap_scene_id"] = log.heatmap_provenance.scene_id;
  h["heatmap_detector_id"] = log.heatmap_provenance.detector_id;
  out << h.dump() << '\n';
  for (const auto& f : log.frames) {
    ojson j;
    j["frame_index"] = f.frame_index;
    j["time_sec"] = f.time_sec;
    j["boxes"] = ojson::array();
    for (const auto& d : f.detections) {
      ojson b = detail::box_json(d.box);
      b["original_conf"] = d.original_conf;
      b["local_mean"] = d.local_mean ? ojson(*d.local_mean) : ojson(nullptr);
      j["boxes"].push_back(std::move(b));
    }
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failure");
}

inline void write_rescored_log_file(const RescoredLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_rescored_log(log, out);
}

}  // namespace blindspot
