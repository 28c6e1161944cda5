#pragma once

#include "avsplat/common.hpp"

#include <vector>

namespace avsplat {

/// Non-owning view of a row-major RGB image of doubles.
struct ImageView {
  int width = 0, height = 0;
  std::span<const double> data;

  std::size_t pixel_count() const { return std::size_t(width) * height; }
};

/// Row-major RGB image, linear color.
struct Image {
  int width = 0, height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0) : width(w), height(h), data(std::size_t(w) * h * 3, fill) {}

  ImageView view() const { return {width, height, data}; }
  double &at(int x, int y, int c) { return data[3 * (std::size_t(y) * width + x) + c]; }
  double at(int x, int y, int c) const { return data[3 * (std::size_t(y) * width + x) + c]; }
};

} // namespace avsplat
