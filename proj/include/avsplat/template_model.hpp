#pragma once

#include "avsplat/skinning.hpp"

#include <vector>

namespace avsplat {

/// Skinned mesh used to seed a Gaussian model: vertex positions, sparse skin
/// weights, the skeleton and optional per-vertex UVs.
struct TemplateModel {
  Skeleton skeleton;
  std::vector<double> vertices; // 3 per vertex
  std::vector<SkinWeights> weights;
  std::vector<double> uv; // 2 per vertex or empty

  std::size_t vertex_count() const { return weights.size(); }
  bool has_uv() const { return !uv.empty(); }
  Vec3 vertex(std::size_t i) const { return vec3_at(std::span<const double>(vertices), i); }

  /// Checks shapes and the skeleton. Weight rows that sum to within
  /// renormalize_tolerance of 1 are rescaled; anything further off throws.
  void validate_and_normalize(double renormalize_tolerance = 1e-4);
};

} // namespace avsplat
