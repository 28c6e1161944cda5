#pragma once

#include "avsplat/model.hpp"

#include <filesystem>
#include <optional>

namespace avsplat {

/// ASCII PLY with x y z, red green blue (DC color, 8-bit sRGB) and opacity per
/// Gaussian. Positions are the displaced canonical centers, deformed by pose
/// when one is given.
void export_ply(const SkinnedGaussianModel &model, const std::optional<Pose> &pose, const std::filesystem::path &path);

} // namespace avsplat
