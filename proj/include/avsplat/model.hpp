#pragma once

#include "avsplat/fields.hpp"
#include "avsplat/skinning.hpp"

#include <string>
#include <vector>

namespace avsplat {

enum class ShMode { Hash, Uv };

const char *to_string(ShMode mode);
ShMode parse_sh_mode(const std::string &s);

/// Canonical skinned Gaussians plus skeleton and parameter fields. Per-point
/// arrays are flat (3 doubles per center, 4 per quaternion, ...).
struct SkinnedGaussianModel {
  Skeleton skeleton;
  std::vector<double> centers;
  std::vector<double> rotations;
  std::vector<double> log_scales;
  std::vector<double> opacity_logits;
  std::vector<SkinWeights> skin; // fixed during training
  std::vector<double> uv;        // 2 per point, empty when the template had none
  FieldBank fields;
  ShMode sh_mode = ShMode::Hash;
  bool ao_active = false; // the AO field drives color; otherwise ao = 1

  std::size_t size() const { return opacity_logits.size(); }
  bool has_uv() const { return !uv.empty(); }
  GaussianGeometry geometry(std::size_t i) const;
  /// Evaluates the fields for point i. SH and AO are sampled at the displaced center.
  SkinnedGaussian point(std::size_t i, double t) const;
  void validate() const;
};

enum class ParamGroup { Centers, Rotations, Scales, Opacity, Joints, HashTable, Mlp, Atlas };

const char *to_string(ParamGroup g);

/// A named contiguous slice of trainable parameters. row_width > 0 marks a
/// table whose gradient is tracked per row.
struct ParamBlock {
  std::string name;
  ParamGroup group;
  std::span<double> values;
  int row_width = 0;
};

std::vector<ParamBlock> parameter_blocks(SkinnedGaussianModel &model);

/// Gradients mirroring the model's trainable parameters, plus the (untrained)
/// pose gradients.
struct ModelGradients {
  std::vector<double> centers, rotations, log_scales, opacity_logits, joints;
  std::vector<double> sh_mlp, displacement_mlp, ao_mlp;
  RowGradient sh_table, displacement_table, ao_table, atlas;
  std::vector<Vec3> euler;
  Vec3 translation = Vec3::Zero();

  ModelGradients() = default;
  explicit ModelGradients(const SkinnedGaussianModel &model);
  void clear();
};

struct GradBlock {
  std::string name;
  std::span<double> dense;          // full gradient array
  const RowGradient *rows = nullptr; // set for row-tracked tables
};

/// Same order as parameter_blocks().
std::vector<GradBlock> gradient_blocks(ModelGradients &g, const SkinnedGaussianModel &model);

} // namespace avsplat
