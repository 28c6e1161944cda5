#pragma once

#include "avsplat/common.hpp"

#include <array>

namespace avsplat {

inline constexpr int kShCoeffs = 9;
inline constexpr int kShScalars = 27; // 9 coefficients x RGB, coefficient-major
inline constexpr int kMaxInfluences = 4;

/// Real degree-2 SH coefficients; entry (k, c) is coefficient k of channel c.
using ShCoefficients = Eigen::Matrix<double, kShCoeffs, 3>;

/// Symmetric 3x3 covariance stored as its upper triangle (xx, xy, xz, yy, yz, zz).
struct Covariance3 {
  std::array<double, 6> upper{};

  Mat3 matrix() const;
  static Covariance3 from_matrix(const Mat3 &m);
};

/// Canonical geometry of one Gaussian. Rotation is an unnormalized (w, x, y, z)
/// quaternion normalized on read; scale is stored as log, opacity as logit.
struct GaussianGeometry {
  Vec3 center = Vec3::Zero();
  Vec4 rotation = Vec4(1, 0, 0, 0);
  Vec3 log_scale = Vec3::Zero();
  double opacity_logit = 0.0;

  double opacity() const { return sigmoid(opacity_logit); }
  Vec3 scale() const { return log_scale.array().exp(); }
};

/// Sparse skin weights, at most four (bone, weight) pairs.
struct SkinWeights {
  std::array<int, kMaxInfluences> bone{0, 0, 0, 0};
  std::array<double, kMaxInfluences> weight{0, 0, 0, 0};
  int count = 0;

  static SkinWeights one_hot(int bone_index);
  double sum() const;
  void normalize();
  /// Keeps the four largest of a dense weight row and renormalizes.
  static SkinWeights from_dense(std::span<const double> dense);
  /// Throws InvalidParameter unless weights are non-negative, sum to 1 within
  /// `tolerance` and reference bones below `bone_count`.
  void validate(int bone_count, double tolerance = 1e-6) const;
};

/// A Gaussian together with its skinning weights and the per-point values
/// sampled from the parameter fields.
struct SkinnedGaussian {
  GaussianGeometry geometry;
  SkinWeights skin;
  ShCoefficients sh = ShCoefficients::Zero();
  Vec3 displacement = Vec3::Zero();
  double ao = 1.0;
};

Mat3 quaternion_to_matrix(const Vec4 &q);
/// Gradient of a loss w.r.t. the raw quaternion given dL/dR, including the normalization.
Vec4 quaternion_to_matrix_backward(const Vec4 &q, const Mat3 &d_rotation);
Vec4 quaternion_from_axis_angle(const Vec3 &axis, double angle);

/// R * diag(exp(s))^2 * R^T.
Covariance3 build_covariance(const Vec4 &q, const Vec3 &log_scale);

/// alpha0 * exp(-1/2 (x - x0)^T Sigma^-1 (x - x0)).
double gaussian_opacity_at(const GaussianGeometry &g, const Vec3 &x);

} // namespace avsplat
