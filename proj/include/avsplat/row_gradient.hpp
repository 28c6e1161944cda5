#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace avsplat {

/// Dense gradient buffer over a table of fixed-width rows that remembers which
/// rows were written, so sparse consumers can visit only those.
class RowGradient {
public:
  RowGradient() = default;
  RowGradient(std::size_t rows, int row_width)
      : width_(row_width), values_(rows * row_width, 0.0), mark_(rows, 0) {}

  int row_width() const { return width_; }
  std::size_t row_count() const { return mark_.size(); }

  double *row(std::uint32_t r) {
    if (!mark_[r]) {
      mark_[r] = 1;
      touched_.push_back(r);
    }
    return values_.data() + static_cast<std::size_t>(r) * width_;
  }

  void add(std::uint32_t r, const double *g, double scale = 1.0) {
    double *dst = row(r);
    for (int k = 0; k < width_; ++k)
      dst[k] += scale * g[k];
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<const std::uint32_t> touched() const { return touched_; }

  void clear() {
    for (std::uint32_t r : touched_) {
      mark_[r] = 0;
      std::fill_n(values_.begin() + static_cast<std::ptrdiff_t>(r) * width_, width_, 0.0);
    }
    touched_.clear();
  }

private:
  int width_ = 1;
  std::vector<double> values_;
  std::vector<std::uint8_t> mark_;
  std::vector<std::uint32_t> touched_;
};

} // namespace avsplat
