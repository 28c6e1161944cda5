#include "avsplat/gaussian.hpp"

#include <algorithm>
#include <numeric>

namespace avsplat {

Mat3 Covariance3::matrix() const {
  Mat3 m;
  m << upper[0], upper[1], upper[2], upper[1], upper[3], upper[4], upper[2], upper[4], upper[5];
  return m;
}

Covariance3 Covariance3::from_matrix(const Mat3 &m) {
  // Average off-diagonals so tiny asymmetries from round-off do not leak through.
  Covariance3 c;
  c.upper = {m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)),
             m(1, 1), 0.5 * (m(1, 2) + m(2, 1)), m(2, 2)};
  return c;
}

SkinWeights SkinWeights::one_hot(int bone_index) {
  SkinWeights w;
  w.bone[0] = bone_index;
  w.weight[0] = 1.0;
  w.count = 1;
  return w;
}

double SkinWeights::sum() const {
  double s = 0.0;
  for (int i = 0; i < count; ++i)
    s += weight[i];
  return s;
}

void SkinWeights::normalize() {
  const double s = sum();
  if (s <= 0.0)
    throw Error(ErrorCode::InvalidParameter, "skin weights sum to zero");
  for (int i = 0; i < count; ++i)
    weight[i] /= s;
}

SkinWeights SkinWeights::from_dense(std::span<const double> dense) {
  std::vector<int> order(dense.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dense[a] > dense[b]; });
  SkinWeights w;
  for (std::size_t i = 0; i < order.size() && w.count < kMaxInfluences; ++i) {
    if (dense[order[i]] <= 0.0)
      break;
    w.bone[w.count] = order[i];
    w.weight[w.count] = dense[order[i]];
    ++w.count;
  }
  w.normalize();
  return w;
}

void SkinWeights::validate(int bone_count, double tolerance) const {
  if (count < 1 || count > kMaxInfluences)
    throw Error(ErrorCode::InvalidParameter, "skin weight count must be in [1, 4]");
  for (int i = 0; i < count; ++i) {
    if (bone[i] < 0 || bone[i] >= bone_count)
      throw Error(ErrorCode::InvalidParameter, "skin weight references bone " + std::to_string(bone[i]));
    if (!(weight[i] >= 0.0))
      throw Error(ErrorCode::InvalidParameter, "negative skin weight");
  }
  if (std::abs(sum() - 1.0) > tolerance)
    throw Error(ErrorCode::InvalidParameter, "skin weights sum to " + std::to_string(sum()));
}

Mat3 quaternion_to_matrix(const Vec4 &q_raw) {
  const double n = q_raw.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw Error(ErrorCode::InvalidParameter, "quaternion must be finite and non-zero");
  const Vec4 q = q_raw / n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y), //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Vec4 quaternion_to_matrix_backward(const Vec4 &q_raw, const Mat3 &g) {
  const double n = q_raw.norm();
  const Vec4 q = q_raw / n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Vec4 dq;
  dq[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  dq[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
               w * g(2, 1) - 2 * x * g(2, 2));
  dq[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
               z * g(2, 1) - 2 * y * g(2, 2));
  dq[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) + y * g(1, 2) +
               x * g(2, 0) + y * g(2, 1));
  return (dq - q * q.dot(dq)) / n;
}

Vec4 quaternion_from_axis_angle(const Vec3 &axis, double angle) {
  const Vec3 a = axis.normalized();
  const double s = std::sin(0.5 * angle);
  return Vec4(std::cos(0.5 * angle), a.x() * s, a.y() * s, a.z() * s);
}

Covariance3 build_covariance(const Vec4 &q, const Vec3 &log_scale) {
  if (!q.allFinite() || !log_scale.allFinite())
    throw Error(ErrorCode::InvalidParameter, "build_covariance: non-finite input");
  const Mat3 r = quaternion_to_matrix(q);
  const Vec3 s2 = (2.0 * log_scale).array().exp();
  return Covariance3::from_matrix(r * s2.asDiagonal() * r.transpose());
}

double gaussian_opacity_at(const GaussianGeometry &g, const Vec3 &x) {
  constexpr double kMinScale = 1e-7;
  if ((g.scale().array() <= kMinScale).any())
    throw Error(ErrorCode::DegenerateGaussian, "scale below 1e-7");
  // Sigma^-1 = R diag(exp(-2s)) R^T, so no explicit inversion is needed.
  const Mat3 r = quaternion_to_matrix(g.rotation);
  const Vec3 local = r.transpose() * (x - g.center);
  const Vec3 inv_s2 = (-2.0 * g.log_scale).array().exp();
  const double m = local.cwiseProduct(local).dot(inv_s2);
  return g.opacity() * std::exp(-0.5 * m);
}

} // namespace avsplat
