#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <png.h>

#include "blindspot/error.hpp"
#include "blindspot/grid.hpp"
#include "blindspot/heatmap.hpp"

namespace blindspot {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
  friend auto operator<=>(const Rgb&, const Rgb&) = default;
};

static_assert(sizeof(Rgb) == 3, "RgbImage rows are handed to libpng as packed RGB");

// Pixels without any detection. Not produced by any palette.
inline constexpr Rgb kUndefinedColor{255, 0, 255};

using RgbImage = Grid<Rgb>;

// 256-entry lookup table; entry i is the color for value i / 255.
class Palette {
 public:
  static constexpr std::size_t kSize = 256;

  static Palette named(std::string_view name) {
    if (name == "gray" || name == "grey") return Palette(gray_table());
    if (name == "viridis") return from_anchors(viridis_anchors());
    if (name == "inferno") return from_anchors(inferno_anchors());
    throw Error(ErrorKind::invalid_argument, "unknown palette: " + std::string(name));
  }

  static constexpr std::array<std::string_view, 3> names() { return {"gray", "viridis", "inferno"}; }

  std::size_t index_of(double value) const noexcept {
    const double v = std::clamp(value, 0.0, 1.0);
    return static_cast<std::size_t>(std::lround(v * static_cast<double>(kSize - 1)));
  }
  Rgb color(double value) const noexcept { return table_[index_of(value)]; }
  const std::array<Rgb, kSize>& table() const noexcept { return table_; }

 private:
  explicit Palette(std::array<Rgb, kSize> table) : table_(table) {}

  static std::array<Rgb, kSize> gray_table() {
    std::array<Rgb, kSize> t{};
    for (std::size_t i = 0; i < kSize; ++i) {
      const auto v = static_cast<std::uint8_t>(i);
      t[i] = {v, v, v};
    }
    return t;
  }

  // Nine evenly spaced anchors, linearly interpolated.
  static Palette from_anchors(const std::array<Rgb, 9>& anchors) {
    std::array<Rgb, kSize> t{};
    for (std::size_t i = 0; i < kSize; ++i) {
      const double pos = static_cast<double>(i) / static_cast<double>(kSize - 1) * 8.0;
      const std::size_t lo = std::min<std::size_t>(static_cast<std::size_t>(pos), 7);
      const double f = pos - static_cast<double>(lo);
      auto lerp = [f](std::uint8_t a, std::uint8_t b) {
        return static_cast<std::uint8_t>(std::lround(a + (b - a) * f));
      };
      t[i] = {lerp(anchors[lo].r, anchors[lo + 1].r), lerp(anchors[lo].g, anchors[lo + 1].g),
              lerp(anchors[lo].b, anchors[lo + 1].b)};
    }
    return Palette(t);
  }

  static std::array<Rgb, 9> viridis_anchors() {
    return {{{68, 1, 84}, {71, 44, 122}, {59, 81, 139}, {44, 113, 142}, {33, 144, 141},
             {39, 173, 129}, {92, 200, 99}, {170, 220, 50}, {253, 231, 37}}};
  }
  static std::array<Rgb, 9> inferno_anchors() {
    return {{{0, 0, 4}, {31, 12, 72}, {85, 15, 109}, {136, 34, 106}, {186, 54, 85},
             {227, 89, 51}, {249, 140, 10}, {249, 201, 50}, {252, 255, 164}}};
  }

  std::array<Rgb, kSize> table_;
};

inline RgbImage render_heatmap(const ConfidenceHeatmap& hm, std::string_view palette_name) {
  const Palette palette = Palette::named(palette_name);
  RgbImage img(hm.width(), hm.height(), kUndefinedColor);
  for (int y = 0; y < hm.height(); ++y) {
    for (int x = 0; x < hm.width(); ++x) {
      if (auto m = hm.mean(x, y)) img(x, y) = palette.color(*m);
    }
  }
  return img;
}

inline void overlay_path(RgbImage& img, std::span<const Pixel> pixels, Rgb color = {255, 255, 255}) {
  for (const Pixel& p : pixels) {
    if (img.contains(p)) img[p] = color;
  }
}

namespace detail {

inline void png_write_to_stream(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::ostream*>(png_get_io_ptr(png));
  out->write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(length));
}

inline void png_flush_stream(png_structp png) {
  static_cast<std::ostream*>(png_get_io_ptr(png))->flush();
}

}  // namespace detail

// 8-bit RGB, no interlacing, default compression.
inline void write_png(const RgbImage& img, std::ostream& out) {
  if (img.width() <= 0 || img.height() <= 0) {
    throw Error(ErrorKind::invalid_argument, "cannot encode an empty image");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw Error(ErrorKind::io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorKind::io, "png_create_info_struct failed");
  }

  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
  for (int y = 0; y < img.height(); ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(reinterpret_cast<const png_byte*>(img.row(y).data()));
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::io, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, detail::png_write_to_stream, detail::png_flush_stream);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (!out) throw Error(ErrorKind::io, "write failure");
}

inline void write_png_file(const RgbImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_png(img, out);
}

}  // namespace blindspot
