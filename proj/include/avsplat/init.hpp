#pragma once

#include "avsplat/model.hpp"
#include "avsplat/template_model.hpp"

namespace avsplat {

struct InitConfig {
  int upsample_k = 20;
  double radius = 0.01; // sampling ball around each template vertex
  double initial_opacity = 0.1;
  double bounds_margin = 0.15; // field box padding beyond the sampled points
  std::uint64_t seed = 0;
  ShMode sh_mode = ShMode::Hash;
  FieldBankConfig fields{};

  void validate() const;
};

/// Each template vertex yields itself plus K points drawn uniformly from a
/// ball around it, all carrying the vertex's skin weights (and UV). Rotations
/// start at identity; exp(scale) is half the mean distance to the vertex's
/// three nearest template neighbors.
SkinnedGaussianModel init_from_skinned_model(const TemplateModel &tmpl, const InitConfig &cfg);

/// Mean distance from each vertex to its k nearest other vertices (brute force).
std::vector<double> mean_neighbor_distance(const TemplateModel &tmpl, int k);

} // namespace avsplat
