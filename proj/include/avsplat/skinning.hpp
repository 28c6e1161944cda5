#pragma once

#include "avsplat/gaussian.hpp"

#include <vector>

namespace avsplat {

/// Joint tree. parent[0] == -1 and parent[i] < i for every other joint.
/// joints holds each joint's canonical position relative to its parent
/// (the root's is absolute), three doubles per joint.
struct Skeleton {
  std::vector<int> parent;
  std::vector<double> joints;

  int bone_count() const { return static_cast<int>(parent.size()); }
  Vec3 joint(int i) const { return vec3_at(std::span<const double>(joints), i); }
  void validate() const;
};

/// Per-frame pose: Euler angles per joint (world rotation for the root, local
/// for the rest), root translation and the normalized timestamp in [0, 1].
struct Pose {
  std::vector<Vec3> euler;
  Vec3 translation = Vec3::Zero();
  double time = 0.0;

  static Pose identity(int bone_count, double time = 0.0);
};

/// Canonical-to-posed affine maps, one per bone. Last rows are (0, 0, 0, 1).
struct BoneTransforms {
  std::vector<Mat4> bones;
};

/// Rz(e.z) * Ry(e.y) * Rx(e.x).
Mat3 euler_to_matrix(const Vec3 &e);
/// dL/de given dL/dR for R = euler_to_matrix(e).
Vec3 euler_to_matrix_backward(const Vec3 &e, const Mat3 &d_rotation);

BoneTransforms compute_bone_transforms(const Skeleton &skel, const Pose &pose);

struct PoseGradients {
  std::vector<Vec3> joints;
  std::vector<Vec3> euler;
  Vec3 translation = Vec3::Zero();
};

/// Reverse-mode pass through compute_bone_transforms. d_bones[i] is dL/d(top 3x4 block of B_i).
PoseGradients compute_bone_transforms_backward(const Skeleton &skel, const Pose &pose,
                                               std::span<const Mat34> d_bones);

/// sum_i w_i B_i. Not rigid in general.
Mat4 blend_transform(const SkinWeights &w, const BoneTransforms &b);

Vec3 deform_point(const Vec3 &x_canonical, const SkinWeights &w, const BoneTransforms &b);

/// Linear part of the blended transform applied to a canonical rotation. Not re-orthonormalized.
Mat3 deform_rotation(const Mat3 &r_canonical, const SkinWeights &w, const BoneTransforms &b);

struct CanonicalDirection {
  Vec3 direction;
  bool singular = false; // blend was not invertible; direction passed through
};

inline constexpr double kSingularBlendDet = 1e-9;

/// normalize(A^-1 d) with A the blended linear part; falls back to d when |det A| <= 1e-9.
CanonicalDirection canonicalize_direction(const Vec3 &d_posed, const SkinWeights &w, const BoneTransforms &b);
CanonicalDirection canonicalize_direction(const Vec3 &d_posed, const Mat3 &blend_linear);

} // namespace avsplat
