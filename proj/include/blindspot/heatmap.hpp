#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "blindspot/detlog.hpp"
#include "blindspot/error.hpp"
#include "blindspot/grid.hpp"
#include "blindspot/parallel.hpp"

namespace blindspot {

// Per-pixel count of person boxes covering the pixel.
struct DetectionHeatmap {
  Provenance provenance;
  Grid<std::uint32_t> counts;

  int width() const noexcept { return counts.width(); }
  int height() const noexcept { return counts.height(); }

  friend bool operator==(const DetectionHeatmap&, const DetectionHeatmap&) = default;
};

// Raw confidence sums and coverage counts; the per-pixel mean is derived on
// demand and is undefined wherever the count is zero.
struct ConfidenceHeatmap {
  Provenance provenance;
  Grid<double> sums;
  Grid<std::uint32_t> counts;

  int width() const noexcept { return sums.width(); }
  int height() const noexcept { return sums.height(); }

  bool defined(int x, int y) const noexcept { return counts(x, y) > 0; }
  bool defined(Pixel p) const noexcept { return counts[p] > 0; }

  std::optional<double> mean(int x, int y) const noexcept {
    const std::uint32_t n = counts(x, y);
    if (n == 0) return std::nullopt;
    return sums(x, y) / static_cast<double>(n);
  }
  std::optional<double> mean(Pixel p) const noexcept { return mean(p.x, p.y); }

  std::size_t defined_count() const noexcept {
    std::size_t n = 0;
    for (auto c : counts.data()) n += c > 0 ? 1 : 0;
    return n;
  }

  friend bool operator==(const ConfidenceHeatmap&, const ConfidenceHeatmap&) = default;
};

struct HeatmapPair {
  ConfidenceHeatmap confidence;
  DetectionHeatmap detection;
};

inline DetectionHeatmap detection_of(const ConfidenceHeatmap& hc) {
  return {hc.provenance, hc.counts};
}

// Accumulates person boxes into fixed-point sums (96 fractional bits) so the
// result does not depend on the order boxes are added or partials merged.
// Confidences are exact in this representation down to 2^-44; anything finer
// is truncated to the 2^-96 grid.
class HeatmapAccumulator {
 public:
  using Fixed = unsigned __int128;
  static constexpr int kFractionBits = 96;

  HeatmapAccumulator(int width, int height, Provenance provenance = {})
      : provenance_(std::move(provenance)), sums_(width, height, 0), counts_(width, height, 0) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorKind::invalid_argument, "heatmap dimensions must be positive");
    }
  }

  static Fixed to_fixed(double confidence) noexcept {
    return static_cast<Fixed>(std::ldexp(confidence, kFractionBits));
  }
  static double to_double(Fixed value) noexcept {
    return std::ldexp(static_cast<double>(value), -kFractionBits);
  }

  int width() const noexcept { return counts_.width(); }
  int height() const noexcept { return counts_.height(); }

  // Adds one box regardless of label; callers filter.
  void add(const BoundingBox& b) {
    check_box(b, width(), height());
    const Fixed c = to_fixed(b.confidence);
    for (int y = b.y1; y <= b.y2; ++y) {
      auto srow = sums_.row(y);
      auto crow = counts_.row(y);
      for (int x = b.x1; x <= b.x2; ++x) {
        srow[static_cast<std::size_t>(x)] += c;
        crow[static_cast<std::size_t>(x)] += 1;
      }
    }
  }

  void add_person_boxes(const Frame& f) {
    for (const auto& b : f.boxes) {
      if (b.is_person()) add(b);
    }
  }

  void merge(const HeatmapAccumulator& other) {
    if (other.width() != width() || other.height() != height()) {
      throw Error(ErrorKind::invalid_argument, "heatmap dimension mismatch");
    }
    for (std::size_t i = 0; i < sums_.size(); ++i) {
      sums_.data()[i] += other.sums_.data()[i];
      counts_.data()[i] += other.counts_.data()[i];
    }
  }

  const Grid<Fixed>& fixed_sums() const noexcept { return sums_; }
  const Grid<std::uint32_t>& counts() const noexcept { return counts_; }

  HeatmapPair finish() const {
    HeatmapPair out;
    out.confidence.provenance = provenance_;
    out.confidence.sums = Grid<double>(width(), height(), 0.0);
    out.confidence.counts = counts_;
    for (std::size_t i = 0; i < sums_.size(); ++i) {
      out.confidence.sums.data()[i] = to_double(sums_.data()[i]);
    }
    out.detection = detection_of(out.confidence);
    return out;
  }

 private:
  Provenance provenance_;
  Grid<Fixed> sums_;
  Grid<std::uint32_t> counts_;
};

// Per-pixel confidence sum and detection count over all person boxes of the
// log; means are sum / count where count > 0.
inline HeatmapPair generate_heatmaps(const DetectionLog& log, unsigned max_threads = 0) {
  validate(log);
  const unsigned threads = max_threads == 0 ? worker_count() : max_threads;
  // Small logs are not worth a per-thread grid.
  const unsigned chunks =
      log.box_count() < 2048 ? 1u : std::min<unsigned>(threads, static_cast<unsigned>(log.frames.size()));

  std::vector<HeatmapAccumulator> partials;
  partials.reserve(std::max(chunks, 1u));
  for (unsigned c = 0; c < std::max(chunks, 1u); ++c) {
    partials.emplace_back(log.width, log.height, log.provenance);
  }
  parallel_chunks(log.frames.size(), std::max(chunks, 1u),
                  [&](std::size_t begin, std::size_t end, unsigned c) {
                    for (std::size_t i = begin; i < end; ++i) partials[c].add_person_boxes(log.frames[i]);
                  });
  for (std::size_t c = 1; c < partials.size(); ++c) partials[0].merge(partials[c]);
  return partials[0].finish();
}

// ---------------------------------------------------------------------------
// Binary persistence. Layout (little-endian):
//   "BSHM" | u16 version | u32 width | u32 height |
//   u32 len + scene_id bytes | u32 len + detector_id bytes |
//   f64 sums[width*height] (row-major) | u32 counts[width*height] (row-major)

inline constexpr std::array<char, 4> kHeatmapMagic = {'B', 'S', 'H', 'M'};
inline constexpr std::uint16_t kHeatmapVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = std::bit_cast<U>(value);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>(bits & 0xFF);
    bits = static_cast<U>(bits >> 8);
  }
  out.write(bytes, sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error(ErrorKind::parse, "truncated heatmap file");
  }
  U bits = 0;
  for (std::size_t i = sizeof(T); i > 0; --i) bits = static_cast<U>((bits << 8) | bytes[i - 1]);
  return std::bit_cast<T>(bits);
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
  const auto len = get_le<std::uint32_t>(in);
  if (len > (1u << 20)) throw Error(ErrorKind::parse, "provenance string too long");
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) throw Error(ErrorKind::parse, "truncated heatmap file");
  return s;
}

}  // namespace detail

inline void save_heatmap(const ConfidenceHeatmap& hm, std::ostream& out) {
  if (hm.counts.width() != hm.sums.width() || hm.counts.height() != hm.sums.height()) {
    throw Error(ErrorKind::invalid_argument, "heatmap dimension mismatch");
  }
  out.write(kHeatmapMagic.data(), kHeatmapMagic.size());
  detail::put_le<std::uint16_t>(out, kHeatmapVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(hm.width()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(hm.height()));
  detail::put_string(out, hm.provenance.scene_id);
  detail::put_string(out, hm.provenance.detector_id);
  for (double v : hm.sums.data()) detail::put_le<double>(out, v);
  for (std::uint32_t c : hm.counts.data()) detail::put_le<std::uint32_t>(out, c);
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failure");
}

inline ConfidenceHeatmap load_heatmap(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size())) throw Error(ErrorKind::parse, "truncated heatmap file");
  if (magic != kHeatmapMagic) throw Error(ErrorKind::parse, "bad magic: not a heatmap file");
  const auto version = detail::get_le<std::uint16_t>(in);
  if (version != kHeatmapVersion) {
    throw Error(ErrorKind::parse, "unsupported heatmap version " + std::to_string(version));
  }
  const auto width = detail::get_le<std::uint32_t>(in);
  const auto height = detail::get_le<std::uint32_t>(in);
  if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16)) {
    throw Error(ErrorKind::parse, "dimension mismatch: invalid heatmap dimensions");
  }
  ConfidenceHeatmap hm;
  hm.provenance.scene_id = detail::get_string(in);
  hm.provenance.detector_id = detail::get_string(in);
  hm.sums = Grid<double>(static_cast<int>(width), static_cast<int>(height), 0.0);
  hm.counts = Grid<std::uint32_t>(static_cast<int>(width), static_cast<int>(height), 0);
  for (double& v : hm.sums.data()) v = detail::get_le<double>(in);
  for (std::uint32_t& c : hm.counts.data()) c = detail::get_le<std::uint32_t>(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::parse, "dimension mismatch: trailing data after heatmap grids");
  }
  for (std::size_t i = 0; i < hm.sums.size(); ++i) {
    const double s = hm.sums.data()[i];
    const std::uint32_t n = hm.counts.data()[i];
    if (!(s >= 0.0) || s > static_cast<double>(n)) {
      throw Error(ErrorKind::parse, "corrupt heatmap: sum outside [0, count]");
    }
  }
  return hm;
}

inline void save_heatmap_file(const ConfidenceHeatmap& hm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  save_heatmap(hm, out);
}

inline ConfidenceHeatmap load_heatmap_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return load_heatmap(in);
}

}  // namespace blindspot
