#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "blindspot/error.hpp"

namespace blindspot {

struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

// Row-major width x height array, origin top-left.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw Error(ErrorKind::invalid_argument, "grid dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool contains(Pixel p) const noexcept { return contains(p.x, p.y); }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  std::size_t index(Pixel p) const noexcept { return index(p.x, p.y); }
  Pixel pixel(std::size_t idx) const noexcept {
    return {static_cast<int>(idx % static_cast<std::size_t>(width_)),
            static_cast<int>(idx / static_cast<std::size_t>(width_))};
  }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
  T& operator[](Pixel p) noexcept { return data_[index(p)]; }
  const T& operator[](Pixel p) const noexcept { return data_[index(p)]; }

  std::span<T> row(int y) noexcept {
    return std::span<T>(data_).subspan(index(0, y), static_cast<std::size_t>(width_));
  }
  std::span<const T> row(int y) const noexcept {
    return std::span<const T>(data_).subspan(index(0, y), static_cast<std::size_t>(width_));
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

}  // namespace blindspot
