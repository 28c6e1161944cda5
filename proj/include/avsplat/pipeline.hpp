#pragma once

#include "avsplat/model.hpp"
#include "avsplat/rasterizer.hpp"

namespace avsplat {

/// One avatar to draw: model, its pose, and whether its AO field is used
/// (ignored unless the model's AO is active).
struct AvatarInstance {
  const SkinnedGaussianModel *model = nullptr;
  Pose pose;
  bool use_ao = true;
};

struct RenderOptions {
  RasterConfig raster{};
  ThreadPool *pool = nullptr;
};

/// Everything the backward pass needs from one avatar's forward evaluation.
struct AvatarForward {
  std::size_t splat_offset = 0; // first source index of this avatar
  bool ao_on = false;
  BoneTransforms bones;
  NeuralField::Batch dx_batch, sh_batch, ao_batch;
  Eigen::MatrixXd dx_raw;   // 3 x n
  Eigen::MatrixXd sh;       // 27 x n
  Eigen::VectorXd ao;       // n
  std::vector<Vec3> shifted; // canonical center + displacement

  struct Point {
    Mat34 blend;
    Mat3 rot_c;
    Mat3 m; // blend linear part * canonical rotation
    Mat3 cov;
    Vec3 posed;
    Vec3 view;      // posed-space unit view direction
    double view_len;
    Vec3 v;         // blend^-1 * view
    Vec3 dir_c;     // canonical view direction
    bool singular = false;
    int splat = -1; // index into SceneForward::splats, -1 when culled
  };
  std::vector<Point> points;
};

struct SceneForward {
  Camera camera;
  std::vector<AvatarForward> avatars;
  std::vector<Splat2D> splats;
  std::vector<std::pair<int, int>> owner; // splat -> (avatar, point)
  FrameBuffers buffers;
};

/// Deforms and shades every avatar, concatenates their splats and rasterizes once.
SceneForward render_forward(std::span<const AvatarInstance> avatars, const Camera &cam, const Vec3 &background,
                            const RenderOptions &opts = {});

FrameBuffers render_avatars(std::span<const AvatarInstance> avatars, const Camera &cam, const Vec3 &background,
                            const RenderOptions &opts = {});

/// Backpropagates dL/d(color buffer) into grads[a] for avatar a. Gradients accumulate.
void render_backward(const SceneForward &fwd, std::span<const AvatarInstance> avatars, std::span<const double> d_image,
                     std::span<ModelGradients *const> grads, const RenderOptions &opts = {});

} // namespace avsplat
