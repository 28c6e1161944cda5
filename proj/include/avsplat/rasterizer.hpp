#pragma once

#include "avsplat/camera.hpp"
#include "avsplat/thread_pool.hpp"

#include <optional>
#include <vector>

namespace avsplat {

/// Splatting thresholds, in one place.
struct RasterConfig {
  int tile_size = 16;
  double lowpass = 0.3;          // pixels^2 added to the screen covariance diagonal
  double alpha_cap = 0.99;
  double alpha_min = 1.0 / 255.0;
  double min_transmittance = 1e-4;
  double min_det = 1e-12;
};

/// Screen-space Gaussian. Pixel (i, j) evaluates the Gaussian at (i, j).
struct Splat2D {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
  double depth = 1.0;
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
  int source = 0;
};

struct ProjectedGeometry {
  Vec2 mean;
  Mat2 cov; // includes the low-pass dilation
  double depth;
};

/// EWA projection of a posed Gaussian. nullopt when the center is at or in front of z_near.
std::optional<ProjectedGeometry> project_gaussian(const Vec3 &position, const Mat3 &cov, const Camera &cam,
                                                  const RasterConfig &cfg = {});

struct ProjectionGradients {
  Vec3 d_position = Vec3::Zero();
  Mat3 d_cov = Mat3::Zero();
};

ProjectionGradients project_gaussian_backward(const Vec3 &position, const Mat3 &cov, const Camera &cam,
                                              const Vec2 &d_mean, const Mat2 &d_cov);

/// Radius (pixels) beyond which a splat's alpha is below alpha_min; 0 when it is invisible everywhere.
double splat_cutoff_radius(const Splat2D &s, const RasterConfig &cfg);

struct FrameBuffers {
  int width = 0, height = 0;
  Vec3 background = Vec3::Zero();
  std::vector<double> color;         // row-major RGB
  std::vector<double> transmittance; // final T per pixel
  std::vector<int> contributors;     // per pixel: 1 + index of the last blended entry in its tile list

  // Forward state consumed by rasterize_backward.
  int tile_size = 0;
  int tiles_x = 0, tiles_y = 0;
  std::size_t splat_count = 0;
  std::vector<std::vector<int>> tile_lists; // depth-sorted splat indices per tile

  Vec3 pixel(int x, int y) const { return Eigen::Map<const Vec3>(color.data() + 3 * (std::size_t(y) * width + x)); }
};

FrameBuffers rasterize_forward(std::span<const Splat2D> splats, const Camera &cam, const Vec3 &background,
                               const RasterConfig &cfg = {}, ThreadPool *pool = nullptr);

/// Untiled oracle: every pixel visits all splats in global (depth, source) order.
FrameBuffers reference_rasterize(std::span<const Splat2D> splats, const Camera &cam, const Vec3 &background,
                                 const RasterConfig &cfg = {});

struct SplatGradients {
  Vec2 d_mean = Vec2::Zero();
  Mat2 d_cov = Mat2::Zero(); // w.r.t. the dilated screen covariance, full (symmetric) matrix
  Vec3 d_color = Vec3::Zero();
  double d_opacity = 0.0;
};

/// d_image is dL/d(color buffer), same layout as FrameBuffers::color.
std::vector<SplatGradients> rasterize_backward(std::span<const Splat2D> splats, const FrameBuffers &buffers,
                                               std::span<const double> d_image, const RasterConfig &cfg = {},
                                               ThreadPool *pool = nullptr);

} // namespace avsplat
