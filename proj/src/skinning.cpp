#include "avsplat/skinning.hpp"

namespace avsplat {

namespace {

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}
Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}
Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}
Mat3 d_rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}
Mat3 d_rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return m;
}
Mat3 d_rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

// Global posed frames (rotation, translation) and canonical joint positions.
struct Chain {
  std::vector<Mat3> local_rot;
  std::vector<Mat3> rot;
  std::vector<Vec3> trans;
  std::vector<Vec3> canon;
};

Chain build_chain(const Skeleton &skel, const Pose &pose) {
  skel.validate();
  const int n = skel.bone_count();
  if (static_cast<int>(pose.euler.size()) != n)
    throw Error(ErrorCode::InvalidParameter, "pose has " + std::to_string(pose.euler.size()) +
                                                 " rotations for " + std::to_string(n) + " bones");
  Chain c;
  c.local_rot.resize(n);
  c.rot.resize(n);
  c.trans.resize(n);
  c.canon.resize(n);
  for (int i = 0; i < n; ++i) {
    c.local_rot[i] = euler_to_matrix(pose.euler[i]);
    const Vec3 j = skel.joint(i);
    const int p = skel.parent[i];
    if (p < 0) {
      // The root pivots about its own canonical position, then translates.
      c.rot[i] = c.local_rot[i];
      c.trans[i] = j + pose.translation;
      c.canon[i] = j;
    } else {
      c.rot[i] = c.rot[p] * c.local_rot[i];
      c.trans[i] = c.rot[p] * j + c.trans[p];
      c.canon[i] = c.canon[p] + j;
    }
  }
  return c;
}

} // namespace

void Skeleton::validate() const {
  const int n = bone_count();
  if (n == 0)
    throw Error(ErrorCode::InvalidSkeleton, "skeleton has no joints");
  if (joints.size() != 3 * parent.size())
    throw Error(ErrorCode::InvalidSkeleton, "joint array length does not match parent array");
  for (int i = 0; i < n; ++i) {
    // Walk to the root; more than n steps means a cycle.
    int cur = i, steps = 0;
    while (cur >= 0) {
      if (cur >= n)
        throw Error(ErrorCode::InvalidSkeleton, "joint " + std::to_string(i) + " has out-of-range parent");
      if (++steps > n)
        throw Error(ErrorCode::InvalidSkeleton, "parent array contains a cycle through joint " + std::to_string(i));
      cur = parent[cur];
    }
  }
  if (parent[0] != -1)
    throw Error(ErrorCode::InvalidSkeleton, "joint 0 must be the root");
  for (int i = 1; i < n; ++i) {
    if (parent[i] < 0)
      throw Error(ErrorCode::InvalidSkeleton, "multiple roots (joint " + std::to_string(i) + ")");
    if (parent[i] >= i)
      throw Error(ErrorCode::InvalidSkeleton, "joint " + std::to_string(i) + " precedes its parent");
  }
  for (double v : joints)
    if (!std::isfinite(v))
      throw Error(ErrorCode::InvalidSkeleton, "non-finite joint position");
}

Pose Pose::identity(int bone_count, double time) {
  Pose p;
  p.euler.assign(bone_count, Vec3::Zero());
  p.time = time;
  return p;
}

Mat3 euler_to_matrix(const Vec3 &e) { return rot_z(e.z()) * rot_y(e.y()) * rot_x(e.x()); }

Vec3 euler_to_matrix_backward(const Vec3 &e, const Mat3 &g) {
  const Mat3 rx = rot_x(e.x()), ry = rot_y(e.y()), rz = rot_z(e.z());
  return Vec3((g.cwiseProduct(rz * ry * d_rot_x(e.x()))).sum(), (g.cwiseProduct(rz * d_rot_y(e.y()) * rx)).sum(),
              (g.cwiseProduct(d_rot_z(e.z()) * ry * rx)).sum());
}

BoneTransforms compute_bone_transforms(const Skeleton &skel, const Pose &pose) {
  const Chain c = build_chain(skel, pose);
  BoneTransforms out;
  out.bones.resize(c.rot.size());
  for (std::size_t i = 0; i < c.rot.size(); ++i) {
    // posed * canonical^-1, with canonical = [I | canon]
    Mat4 b = Mat4::Identity();
    b.topLeftCorner<3, 3>() = c.rot[i];
    b.topRightCorner<3, 1>() = c.trans[i] - c.rot[i] * c.canon[i];
    out.bones[i] = b;
  }
  return out;
}

PoseGradients compute_bone_transforms_backward(const Skeleton &skel, const Pose &pose,
                                               std::span<const Mat34> d_bones) {
  const Chain c = build_chain(skel, pose);
  const int n = skel.bone_count();
  if (static_cast<int>(d_bones.size()) != n)
    throw Error(ErrorCode::DimensionMismatch, "bone gradient count mismatch");

  std::vector<Mat3> d_rot(n, Mat3::Zero());
  std::vector<Vec3> d_trans(n, Vec3::Zero());
  std::vector<Vec3> d_canon(n, Vec3::Zero());
  for (int i = 0; i < n; ++i) {
    const Mat3 ga = d_bones[i].leftCols<3>();
    const Vec3 gb = d_bones[i].col(3);
    d_rot[i] += ga - gb * c.canon[i].transpose();
    d_trans[i] += gb;
    d_canon[i] -= c.rot[i].transpose() * gb;
  }

  PoseGradients out;
  out.joints.assign(n, Vec3::Zero());
  out.euler.assign(n, Vec3::Zero());
  for (int i = n - 1; i >= 0; --i) {
    const int p = skel.parent[i];
    const Vec3 j = skel.joint(i);
    if (p < 0) {
      out.euler[i] = euler_to_matrix_backward(pose.euler[i], d_rot[i]);
      out.joints[i] += d_trans[i] + d_canon[i];
      out.translation += d_trans[i];
      continue;
    }
    d_rot[p] += d_rot[i] * c.local_rot[i].transpose() + d_trans[i] * j.transpose();
    out.euler[i] = euler_to_matrix_backward(pose.euler[i], c.rot[p].transpose() * d_rot[i]);
    out.joints[i] += c.rot[p].transpose() * d_trans[i] + d_canon[i];
    d_trans[p] += d_trans[i];
    d_canon[p] += d_canon[i];
  }
  return out;
}

Mat4 blend_transform(const SkinWeights &w, const BoneTransforms &b) {
  Mat4 m = Mat4::Zero();
  for (int k = 0; k < w.count; ++k)
    m += w.weight[k] * b.bones[w.bone[k]];
  return m;
}

Vec3 deform_point(const Vec3 &x, const SkinWeights &w, const BoneTransforms &b) {
  const Mat4 a = blend_transform(w, b);
  return a.topLeftCorner<3, 3>() * x + a.topRightCorner<3, 1>();
}

Mat3 deform_rotation(const Mat3 &r, const SkinWeights &w, const BoneTransforms &b) {
  return blend_transform(w, b).topLeftCorner<3, 3>() * r;
}

CanonicalDirection canonicalize_direction(const Vec3 &d, const Mat3 &a) {
  if (std::abs(a.determinant()) <= kSingularBlendDet)
    return {d, true};
  const Vec3 v = a.inverse() * d;
  return {v.normalized(), false};
}

CanonicalDirection canonicalize_direction(const Vec3 &d, const SkinWeights &w, const BoneTransforms &b) {
  return canonicalize_direction(d, Mat3(blend_transform(w, b).topLeftCorner<3, 3>()));
}

} // namespace avsplat
