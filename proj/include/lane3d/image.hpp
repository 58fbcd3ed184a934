#pragma once

#include <cstddef>
#include <vector>

#include "lane3d/error.hpp"

namespace lane3d {

/// Row-major H x W x C float raster. Color images hold values in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 3, float fill = 0.0f)
      : width_(width), height_(height), channels_(channels) {
    detail::require(width > 0 && height > 0 && channels > 0, "Image: dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int row, int col, int ch = 0) { return data_[index(row, col, ch)]; }
  float at(int row, int col, int ch = 0) const { return data_[index(row, col, ch)]; }

  const std::vector<float>& data() const noexcept { return data_; }
  std::vector<float>& data() noexcept { return data_; }

  bool same_shape(const Image& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int row, int col, int ch) const noexcept {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Per-pixel boolean mask, row-major.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<bool> values;

  Mask() = default;
  Mask(int w, int h, bool fill) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  bool at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  void set(int row, int col, bool v) { values[static_cast<std::size_t>(row) * width + col] = v; }
  std::size_t count() const {
    std::size_t n = 0;
    for (bool b : values) n += b ? 1 : 0;
    return n;
  }
};

}  // namespace lane3d
