#include "avsplat/rasterizer.hpp"

#include <algorithm>
#include <numeric>

namespace avsplat {

namespace {

struct Prepared {
  Vec3 conic = Vec3::Zero(); // (a, b, c) of the inverse covariance
  double radius = 0.0;
  bool valid = false;   // covariance invertible
  bool visible = false; // valid and reaches alpha_min somewhere
};

Prepared prepare(const Splat2D &s, const RasterConfig &cfg) {
  Prepared p;
  const double det = s.cov.determinant();
  if (!(det >= cfg.min_det) || !s.mean.allFinite())
    return p;
  p.conic = Vec3(s.cov(1, 1) / det, -s.cov(0, 1) / det, s.cov(0, 0) / det);
  p.valid = true;
  p.radius = splat_cutoff_radius(s, cfg);
  p.visible = p.radius > 0.0;
  return p;
}

// Gaussian exponent at offset d = pixel - mean.
inline double exponent(const Vec3 &q, double dx, double dy) {
  return -0.5 * (q[0] * dx * dx + q[2] * dy * dy) - q[1] * dx * dy;
}

bool depth_less(const Splat2D &a, const Splat2D &b) {
  if (a.depth != b.depth)
    return a.depth < b.depth;
  return a.source < b.source;
}

// Front-to-back blend of an ordered list at one pixel. Returns the index after
// the last blended entry.
template <typename Visit>
int composite(std::span<const int> order, std::span<const Splat2D> splats, std::span<const Prepared> prep, double px,
              double py, const RasterConfig &cfg, double &t_out, Vec3 &c_out, Visit &&visit) {
  double t = 1.0;
  Vec3 c = Vec3::Zero();
  int last = 0;
  for (int k = 0; k < static_cast<int>(order.size()); ++k) {
    const int i = order[k];
    if (!prep[i].visible)
      continue;
    const Splat2D &s = splats[i];
    const double power = exponent(prep[i].conic, px - s.mean.x(), py - s.mean.y());
    if (power > 0.0)
      continue;
    const double alpha = std::min(cfg.alpha_cap, s.opacity * std::exp(power));
    if (alpha < cfg.alpha_min)
      continue;
    const double next_t = t * (1.0 - alpha);
    if (next_t < cfg.min_transmittance)
      break;
    c += s.color * (alpha * t);
    visit(i, alpha * t);
    t = next_t;
    last = k + 1;
  }
  t_out = t;
  c_out = c;
  return last;
}

FrameBuffers make_buffers(const Camera &cam, const Vec3 &background, std::size_t n) {
  FrameBuffers fb;
  fb.width = cam.width;
  fb.height = cam.height;
  fb.background = background;
  const std::size_t px = std::size_t(cam.width) * cam.height;
  fb.color.assign(3 * px, 0.0);
  fb.transmittance.assign(px, 1.0);
  fb.contributors.assign(px, 0);
  fb.splat_count = n;
  return fb;
}

} // namespace

std::optional<ProjectedGeometry> project_gaussian(const Vec3 &position, const Mat3 &cov, const Camera &cam,
                                                  const RasterConfig &cfg) {
  const Vec3 p = cam.to_camera(position);
  if (!(p.z() > cam.z_near))
    return std::nullopt;
  const double z = p.z(), iz = 1.0 / z;
  Eigen::Matrix<double, 2, 3> jac;
  jac << cam.fx * iz, 0, -cam.fx * p.x() * iz * iz, 0, cam.fy * iz, -cam.fy * p.y() * iz * iz;
  const Eigen::Matrix<double, 2, 3> t = jac * cam.rotation;
  ProjectedGeometry g;
  g.mean = Vec2(cam.fx * p.x() * iz + cam.cx, cam.fy * p.y() * iz + cam.cy);
  g.cov = t * cov * t.transpose();
  g.cov = 0.5 * (g.cov + g.cov.transpose()).eval();
  g.cov.diagonal().array() += cfg.lowpass;
  g.depth = z;
  return g;
}

ProjectionGradients project_gaussian_backward(const Vec3 &position, const Mat3 &cov, const Camera &cam,
                                              const Vec2 &d_mean, const Mat2 &d_cov) {
  const Vec3 p = cam.to_camera(position);
  const double x = p.x(), y = p.y(), z = p.z(), iz = 1.0 / z, iz2 = iz * iz, iz3 = iz2 * iz;
  Eigen::Matrix<double, 2, 3> jac;
  jac << cam.fx * iz, 0, -cam.fx * x * iz2, 0, cam.fy * iz, -cam.fy * y * iz2;
  const Eigen::Matrix<double, 2, 3> t = jac * cam.rotation;

  ProjectionGradients g;
  g.d_cov = t.transpose() * d_cov * t;
  const Eigen::Matrix<double, 2, 3> d_t = (d_cov + d_cov.transpose()) * t * cov;
  const Eigen::Matrix<double, 2, 3> d_jac = d_t * cam.rotation.transpose();

  Vec3 dp;
  dp.x() = cam.fx * iz * d_mean.x() - cam.fx * iz2 * d_jac(0, 2);
  dp.y() = cam.fy * iz * d_mean.y() - cam.fy * iz2 * d_jac(1, 2);
  dp.z() = -cam.fx * x * iz2 * d_mean.x() - cam.fy * y * iz2 * d_mean.y() - cam.fx * iz2 * d_jac(0, 0) +
           2 * cam.fx * x * iz3 * d_jac(0, 2) - cam.fy * iz2 * d_jac(1, 1) + 2 * cam.fy * y * iz3 * d_jac(1, 2);
  g.d_position = cam.rotation.transpose() * dp;
  return g;
}

double splat_cutoff_radius(const Splat2D &s, const RasterConfig &cfg) {
  const double ratio = s.opacity / cfg.alpha_min;
  if (!(ratio >= 1.0))
    return 0.0;
  const double a = s.cov(0, 0), b = s.cov(0, 1), c = s.cov(1, 1);
  const double mid = 0.5 * (a + c);
  const double lambda_max = mid + std::sqrt(std::max(0.25 * (a - c) * (a - c) + b * b, 0.0));
  // Pixels farther than this have alpha < alpha_min, so tiling outside it loses nothing.
  return std::sqrt(2.0 * lambda_max * std::log(ratio)) * (1.0 + 1e-9) + 1e-6;
}

FrameBuffers rasterize_forward(std::span<const Splat2D> splats, const Camera &cam, const Vec3 &background,
                               const RasterConfig &cfg, ThreadPool *pool) {
  cam.validate();
  FrameBuffers fb = make_buffers(cam, background, splats.size());
  const int ts = cfg.tile_size;
  fb.tile_size = ts;
  fb.tiles_x = (cam.width + ts - 1) / ts;
  fb.tiles_y = (cam.height + ts - 1) / ts;
  fb.tile_lists.assign(std::size_t(fb.tiles_x) * fb.tiles_y, {});

  std::vector<Prepared> prep(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i) {
    prep[i] = prepare(splats[i], cfg);
    if (!prep[i].visible)
      continue;
    const Splat2D &s = splats[i];
    const double r = prep[i].radius;
    const int x0 = std::max(0, static_cast<int>(std::floor((s.mean.x() - r) / ts)));
    const int x1 = std::min(fb.tiles_x - 1, static_cast<int>(std::floor((s.mean.x() + r) / ts)));
    const int y0 = std::max(0, static_cast<int>(std::floor((s.mean.y() - r) / ts)));
    const int y1 = std::min(fb.tiles_y - 1, static_cast<int>(std::floor((s.mean.y() + r) / ts)));
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx)
        fb.tile_lists[std::size_t(ty) * fb.tiles_x + tx].push_back(static_cast<int>(i));
  }

  parallel_for(pool, fb.tile_lists.size(), [&](std::size_t tile) {
    auto &list = fb.tile_lists[tile];
    std::stable_sort(list.begin(), list.end(), [&](int a, int b) { return depth_less(splats[a], splats[b]); });
    const int tx = static_cast<int>(tile) % fb.tiles_x, ty = static_cast<int>(tile) / fb.tiles_x;
    for (int y = ty * ts; y < std::min((ty + 1) * ts, cam.height); ++y)
      for (int x = tx * ts; x < std::min((tx + 1) * ts, cam.width); ++x) {
        const std::size_t pix = std::size_t(y) * cam.width + x;
        double t;
        Vec3 c;
        fb.contributors[pix] = composite(list, splats, prep, x, y, cfg, t, c, [](int, double) {});
        fb.transmittance[pix] = t;
        Eigen::Map<Vec3>(fb.color.data() + 3 * pix) = c + t * background;
      }
  });
  return fb;
}

FrameBuffers reference_rasterize(std::span<const Splat2D> splats, const Camera &cam, const Vec3 &background,
                                 const RasterConfig &cfg) {
  cam.validate();
  FrameBuffers fb = make_buffers(cam, background, splats.size());
  std::vector<Prepared> prep(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i) {
    prep[i] = prepare(splats[i], cfg);
    // The oracle does no extent culling: only the alpha and transmittance rules apply.
    prep[i].visible = prep[i].valid;
  }
  std::vector<int> order(splats.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return depth_less(splats[a], splats[b]); });
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t pix = std::size_t(y) * cam.width + x;
      double t;
      Vec3 c;
      fb.contributors[pix] = composite(order, splats, prep, x, y, cfg, t, c, [](int, double) {});
      fb.transmittance[pix] = t;
      Eigen::Map<Vec3>(fb.color.data() + 3 * pix) = c + t * background;
    }
  return fb;
}

std::vector<SplatGradients> rasterize_backward(std::span<const Splat2D> splats, const FrameBuffers &fb,
                                               std::span<const double> d_image, const RasterConfig &cfg,
                                               ThreadPool *pool) {
  if (fb.splat_count != splats.size() || fb.tile_lists.empty() ||
      d_image.size() != std::size_t(3) * fb.width * fb.height || fb.tile_size != cfg.tile_size)
    throw Error(ErrorCode::Internal, "rasterize_backward: state does not match the forward pass");

  std::vector<Prepared> prep(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i)
    prep[i] = prepare(splats[i], cfg);

  // Per-tile partial gradients (one slot per list entry, d_conic kept in
  // place of d_cov) reduced afterwards in tile order.
  std::vector<std::vector<SplatGradients>> partial(fb.tile_lists.size());
  const int ts = fb.tile_size;
  parallel_for(pool, fb.tile_lists.size(), [&](std::size_t tile) {
    const auto &list = fb.tile_lists[tile];
    auto &acc = partial[tile];
    acc.assign(list.size(), SplatGradients{});
    const int tx = static_cast<int>(tile) % fb.tiles_x, ty = static_cast<int>(tile) / fb.tiles_x;
    for (int y = ty * ts; y < std::min((ty + 1) * ts, fb.height); ++y)
      for (int x = tx * ts; x < std::min((tx + 1) * ts, fb.width); ++x) {
        const std::size_t pix = std::size_t(y) * fb.width + x;
        const Vec3 g = Eigen::Map<const Vec3>(d_image.data() + 3 * pix);
        if (g.isZero(0.0))
          continue;
        const double t_final = fb.transmittance[pix];
        const double bg_term = g.dot(fb.background);
        double t = t_final;
        Vec3 behind = Vec3::Zero();
        for (int k = fb.contributors[pix] - 1; k >= 0; --k) {
          const int i = list[k];
          if (!prep[i].visible)
            continue;
          const Splat2D &s = splats[i];
          const double dx = x - s.mean.x(), dy = y - s.mean.y();
          const Vec3 &q = prep[i].conic;
          const double power = exponent(q, dx, dy);
          if (power > 0.0)
            continue;
          const double gauss = std::exp(power);
          const double raw = s.opacity * gauss;
          const double alpha = std::min(cfg.alpha_cap, raw);
          if (alpha < cfg.alpha_min)
            continue;
          t /= (1.0 - alpha);
          SplatGradients &out = acc[k];
          out.d_color += (alpha * t) * g;
          const double d_alpha = t * g.dot(s.color - behind) - t_final / (1.0 - alpha) * bg_term;
          behind = alpha * s.color + (1.0 - alpha) * behind;
          if (raw > cfg.alpha_cap)
            continue;
          out.d_opacity += d_alpha * gauss;
          const double d_power = d_alpha * raw;
          out.d_mean.x() += d_power * (q[0] * dx + q[1] * dy);
          out.d_mean.y() += d_power * (q[2] * dy + q[1] * dx);
          // d_cov temporarily holds dL/d(conic) as a symmetric matrix.
          out.d_cov(0, 0) += -0.5 * d_power * dx * dx;
          out.d_cov(1, 1) += -0.5 * d_power * dy * dy;
          out.d_cov(0, 1) += -0.5 * d_power * dx * dy;
          out.d_cov(1, 0) += -0.5 * d_power * dx * dy;
        }
      }
  });

  std::vector<SplatGradients> grads(splats.size());
  for (std::size_t tile = 0; tile < partial.size(); ++tile) {
    const auto &list = fb.tile_lists[tile];
    for (std::size_t k = 0; k < partial[tile].size(); ++k) {
      SplatGradients &dst = grads[list[k]];
      const SplatGradients &src = partial[tile][k];
      dst.d_mean += src.d_mean;
      dst.d_cov += src.d_cov;
      dst.d_color += src.d_color;
      dst.d_opacity += src.d_opacity;
    }
  }
  for (std::size_t i = 0; i < splats.size(); ++i) {
    if (!prep[i].visible)
      continue;
    const Vec3 &q = prep[i].conic;
    Mat2 conic;
    conic << q[0], q[1], q[1], q[2];
    grads[i].d_cov = -conic * grads[i].d_cov * conic;
  }
  return grads;
}

} // namespace avsplat
