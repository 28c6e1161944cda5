#pragma once

#include "avsplat/common.hpp"
#include "avsplat/row_gradient.hpp"

#include <random>
#include <vector>

namespace avsplat {

struct HashGridConfig {
  int levels = 16;
  int features = 2;
  int base_resolution = 16;
  int finest_resolution = 2048;
  int log2_table_size = 17;

  int output_width() const { return levels * features; }
  std::size_t table_size() const { return std::size_t{1} << log2_table_size; }
  /// Per-level resolution growth factor.
  double growth() const;
  void validate() const;
};

/// Multiresolution hash encoding over the unit cube. Coarse levels whose
/// vertex grid fits in the table are indexed densely; finer levels use the
/// XOR-of-primes spatial hash modulo the table size.
class HashGrid {
public:
  struct Level {
    int resolution;
    std::size_t offset; // in rows
    std::size_t rows;
    bool dense;
  };

  HashGrid() = default;
  explicit HashGrid(const HashGridConfig &cfg);

  const HashGridConfig &config() const { return cfg_; }
  const std::vector<Level> &levels() const { return levels_; }
  std::size_t row_count() const { return rows_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  void init_uniform(std::mt19937_64 &rng, double range = 1e-4);

  /// Row index of grid vertex (ix, iy, iz) at the given level.
  std::uint32_t vertex_row(int level, std::uint32_t ix, std::uint32_t iy, std::uint32_t iz) const;

  /// Writes levels * features values to out. x is clamped to [0, 1]^3.
  void encode(const Vec3 &x, double *out) const;

  /// Accumulates dL/dtable into grad and returns dL/dx. Axes where x was
  /// clamped get zero gradient.
  Vec3 backward(const Vec3 &x, const double *d_out, RowGradient &grad) const;

private:
  HashGridConfig cfg_;
  std::vector<Level> levels_;
  std::size_t rows_ = 0;
  std::vector<double> params_;
};

} // namespace avsplat
