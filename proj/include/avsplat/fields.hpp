#pragma once

#include "avsplat/gaussian.hpp"
#include "avsplat/hash_grid.hpp"
#include "avsplat/mlp.hpp"

#include <optional>

namespace avsplat {

/// Axis-aligned box used to map canonical positions into the unit cube.
struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();

  Vec3 extent() const { return max - min; }
  /// Position in [0, 1]^3, clamped.
  Vec3 to_unit(const Vec3 &x) const;
  /// d(to_unit)/dx per axis; zero where the position was clamped.
  Vec3 to_unit_derivative(const Vec3 &x) const;
};

struct FieldBankConfig {
  HashGridConfig sh_grid{};
  HashGridConfig displacement_grid{};
  HashGridConfig ao_grid{16, 2, 16, 2048, 19};
  int hidden_width = 64;
  int hidden_layers = 2;
  int time_frequencies = 6;
  double max_displacement = 0.10;
  double ao_bias = 0.0; // initial AO output logit
  int atlas_width = 0; // 0 disables the UV atlas
  int atlas_height = 0;

  void validate() const;
};

/// (sin(2^k pi t), cos(2^k pi t)) for k = 0 .. n_freq - 1, interleaved.
std::vector<double> positional_encode_time(double t, int n_freq);

/// Hash grid followed by an MLP. Extra (non-spatial) inputs are appended after the encoding.
class NeuralField {
public:
  struct Batch {
    Eigen::MatrixXd unit_positions;
    Mlp::Cache cache;
  };

  NeuralField() = default;
  NeuralField(const HashGridConfig &grid, int hidden_width, int hidden_layers, int extra_inputs, int output_width);

  HashGrid grid;
  Mlp mlp;
  int extra_inputs = 0;

  /// unit_positions: 3 x n in [0,1]; extra: extra_inputs x n (or nullptr when none).
  Eigen::MatrixXd forward(const Eigen::MatrixXd &unit_positions, const Eigen::MatrixXd *extra,
                          Batch *batch = nullptr) const;
  /// Accumulates parameter gradients; returns dL/d(unit_positions), 3 x n.
  Eigen::MatrixXd backward(const Batch &batch, const Eigen::MatrixXd &d_output, RowGradient &table_grad,
                           std::span<double> mlp_grad) const;
};

/// Learnable W x H texture of SH coefficients (27 channels per texel), sampled bilinearly
/// with texel centers at ((i + 0.5) / W, (j + 0.5) / H).
class UvAtlas {
public:
  UvAtlas() = default;
  UvAtlas(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  double *texel(int i, int j) { return params_.data() + (std::size_t(j) * width_ + i) * kShScalars; }

  ShCoefficients sample(const Vec2 &uv) const;
  void backward(const Vec2 &uv, const ShCoefficients &d_sh, RowGradient &grad) const;

private:
  struct Taps {
    int idx[4];
    double w[4];
  };
  Taps taps(const Vec2 &uv) const;

  int width_ = 0, height_ = 0;
  std::vector<double> params_;
};

/// The three per-parameter networks (SH, displacement, ambient occlusion) and the optional UV atlas.
class FieldBank {
public:
  FieldBank() = default;
  FieldBank(const FieldBankConfig &cfg, const Aabb &bounds, std::uint64_t seed);

  const FieldBankConfig &config() const { return cfg_; }

  Aabb bounds;
  NeuralField sh;
  NeuralField displacement;
  NeuralField ao;
  std::optional<UvAtlas> atlas;

  /// Raw SH head and tanh-bounded displacement at a canonical position.
  std::pair<ShCoefficients, Vec3> sample_shape_appearance(const Vec3 &x0) const;
  /// Sigmoid AO at a canonical position and normalized time; exactly 1 when disabled.
  double sample_ao(const Vec3 &x0, double t, bool enabled = true) const;
  /// Throws Configuration when the bank carries no atlas.
  ShCoefficients uv_sample_sh(const Vec2 &uv) const;

private:
  FieldBankConfig cfg_;
};

ShCoefficients sh_from_column(const Eigen::Ref<const Eigen::VectorXd> &column);
void sh_to_column(const ShCoefficients &sh, Eigen::Ref<Eigen::VectorXd> column);

} // namespace avsplat
