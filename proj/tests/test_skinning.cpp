#include "avsplat/skinning.hpp"

#include "test_util.hpp"

using namespace avsplat;
using avsplat::testing::central_difference;

namespace {

Mat4 translate(const Vec3 &t) {
  Mat4 m = Mat4::Identity();
  m.topRightCorner<3, 1>() = t;
  return m;
}

Mat4 rotate(const Mat3 &r) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r;
  return m;
}

Mat3 axis_rotation(const Vec3 &axis, double angle) { return Eigen::AngleAxisd(angle, axis.normalized()).matrix(); }

// Independent 4x4 composition: G_root = T(J0 + tau) R0, G_i = G_parent T(j_i) R_i, B_i = G_i T(-canonical_i).
std::vector<Mat4> oracle_chain(const Skeleton &s, const Pose &p) {
  const int n = s.bone_count();
  std::vector<Mat4> g(n), b(n);
  std::vector<Vec3> canon(n);
  for (int i = 0; i < n; ++i) {
    const Mat3 r = axis_rotation(Vec3::UnitZ(), p.euler[i].z()) * axis_rotation(Vec3::UnitY(), p.euler[i].y()) *
                   axis_rotation(Vec3::UnitX(), p.euler[i].x());
    if (s.parent[i] < 0) {
      g[i] = translate(s.joint(i) + p.translation) * rotate(r);
      canon[i] = s.joint(i);
    } else {
      g[i] = g[s.parent[i]] * translate(s.joint(i)) * rotate(r);
      canon[i] = canon[s.parent[i]] + s.joint(i);
    }
    b[i] = g[i] * translate(-canon[i]);
  }
  return b;
}

Skeleton chain(int n) {
  Skeleton s;
  for (int i = 0; i < n; ++i) {
    s.parent.push_back(i - 1);
    const Vec3 j = i == 0 ? Vec3(0.1, -0.2, 0.05) : Vec3(0.05 * i, 0.4, -0.03 * i);
    s.joints.insert(s.joints.end(), {j.x(), j.y(), j.z()});
  }
  return s;
}

} // namespace

TEST(Skeleton, ValidateRejectsCyclesAndBadOrder) {
  Skeleton s = chain(3);
  EXPECT_NO_THROW(s.validate());
  s.parent[0] = 0;
  try {
    s.validate();
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidSkeleton);
  }
  s = chain(3);
  s.parent = {-1, 2, 1};
  EXPECT_THROW(s.validate(), Error);
  s.parent = {-1, -1, 1};
  EXPECT_THROW(s.validate(), Error);
  s.parent = {-1, 0, 7};
  EXPECT_THROW(s.validate(), Error);
  s = chain(2);
  s.joints.pop_back();
  EXPECT_THROW(s.validate(), Error);
}

TEST(BoneTransforms, RestPoseIsIdentity) {
  const Skeleton s = chain(4);
  for (const Mat4 &b : compute_bone_transforms(s, Pose::identity(4)).bones)
    EXPECT_LT((b - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BoneTransforms, RootTranslationPropagates) {
  const Skeleton s = chain(4);
  Pose p = Pose::identity(4);
  p.translation = Vec3(1, 2, 3);
  for (const Mat4 &b : compute_bone_transforms(s, p).bones)
    EXPECT_LT((b - translate(Vec3(1, 2, 3))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BoneTransforms, TwoBoneQuarterTurn) {
  Skeleton s;
  s.parent = {-1, 0};
  s.joints = {0, 0, 0, 0, 1, 0};
  Pose p = Pose::identity(2);
  p.euler[0] = Vec3(0, 0, M_PI / 2);
  const BoneTransforms bt = compute_bone_transforms(s, p);
  const Vec4 x = bt.bones[1] * Vec4(0, 1, 0, 1);
  EXPECT_LT((x.head<3>() - Vec3(-1, 0, 0)).norm(), 1e-12);
  EXPECT_LT((bt.bones[1] - oracle_chain(s, p)[1]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BoneTransforms, FourBoneChainMatchesMatrixOracle) {
  const Skeleton s = chain(4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Pose p = avsplat::testing::random_pose(4, seed, 1.2);
    const BoneTransforms bt = compute_bone_transforms(s, p);
    const std::vector<Mat4> oracle = oracle_chain(s, p);
    for (int i = 0; i < 4; ++i)
      EXPECT_LT((bt.bones[i] - oracle[i]).cwiseAbs().maxCoeff(), 1e-9) << "bone " << i << " seed " << seed;
  }
}

TEST(BoneTransforms, JointPositionIsFixedByItsBone) {
  // The posed joint location equals B_i applied to its canonical location.
  const Skeleton s = chain(3);
  const Pose p = avsplat::testing::random_pose(3, 5, 1.0);
  const BoneTransforms bt = compute_bone_transforms(s, p);
  const Vec3 canon1 = s.joint(0) + s.joint(1);
  const Vec3 canon2 = canon1 + s.joint(2);
  // Child joint 2 sits at the end of bone 1, so bones 1 and 2 agree there.
  const Vec4 a = bt.bones[1] * canon2.homogeneous();
  const Vec4 b = bt.bones[2] * canon2.homogeneous();
  EXPECT_LT((a - b).norm(), 1e-12);
  const Vec4 c = bt.bones[0] * canon1.homogeneous();
  const Vec4 d = bt.bones[1] * canon1.homogeneous();
  EXPECT_LT((c - d).norm(), 1e-12);
}

TEST(BoneTransforms, PoseSizeMismatchThrows) {
  EXPECT_THROW(compute_bone_transforms(chain(3), Pose::identity(2)), Error);
}

TEST(BoneTransforms, BackwardMatchesFiniteDifferences) {
  Skeleton s = chain(3);
  Pose p = avsplat::testing::random_pose(3, 11, 0.8);
  std::vector<Mat34> g(3);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (Mat34 &m : g)
    m = Mat34::NullaryExpr([&] { return u(rng); });
  auto f = [&] {
    const BoneTransforms bt = compute_bone_transforms(s, p);
    double acc = 0;
    for (int i = 0; i < 3; ++i)
      acc += bt.bones[i].topRows<3>().cwiseProduct(g[i]).sum();
    return acc;
  };
  const PoseGradients pg = compute_bone_transforms_backward(s, p, g);
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 3; ++a) {
      EXPECT_NEAR(pg.joints[i][a], central_difference(f, s.joints[3 * i + a], 1e-6), 1e-7);
      EXPECT_NEAR(pg.euler[i][a], central_difference(f, p.euler[i][a], 1e-6), 1e-7);
    }
  for (int a = 0; a < 3; ++a)
    EXPECT_NEAR(pg.translation[a], central_difference(f, p.translation[a], 1e-6), 1e-7);
}

TEST(Euler, OrderIsZYX) {
  const Vec3 e(0.3, -0.7, 1.1);
  const Mat3 expect = axis_rotation(Vec3::UnitZ(), e.z()) * axis_rotation(Vec3::UnitY(), e.y()) *
                      axis_rotation(Vec3::UnitX(), e.x());
  EXPECT_LT((euler_to_matrix(e) - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Blend, OneHotSelectsBone) {
  const BoneTransforms bt = compute_bone_transforms(chain(3), avsplat::testing::random_pose(3, 1));
  for (int k = 0; k < 3; ++k)
    EXPECT_EQ(blend_transform(SkinWeights::one_hot(k), bt), bt.bones[k]);
}

TEST(Blend, HalfTranslationAverages) {
  BoneTransforms bt;
  bt.bones = {Mat4::Identity(), translate(Vec3(2, 0, 0))};
  const SkinWeights w = SkinWeights::from_dense(std::vector<double>{0.5, 0.5});
  const Mat4 a = blend_transform(w, bt);
  EXPECT_LT((a.topLeftCorner<3, 3>() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((a.topRightCorner<3, 1>() - Vec3(1, 0, 0)).norm(), 1e-15);
}

TEST(Blend, AveragedRotationShrinksDeterminant) {
  BoneTransforms bt;
  bt.bones = {rotate(axis_rotation(Vec3::UnitZ(), M_PI / 2)), Mat4::Identity()};
  const SkinWeights w = SkinWeights::from_dense(std::vector<double>{0.5, 0.5});
  const Mat3 l = blend_transform(w, bt).topLeftCorner<3, 3>();
  Mat3 expect;
  expect << 0.5, -0.5, 0, 0.5, 0.5, 0, 0, 0, 1;
  EXPECT_LT((l - expect).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(l.determinant(), 1.0);
  // A blended rotation still yields a PSD covariance.
  const Mat3 r_t = deform_rotation(Mat3::Identity(), w, bt);
  const Mat3 cov = r_t * Vec3(1, 4, 9).asDiagonal() * r_t.transpose();
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mat3>(cov).eigenvalues().minCoeff(), -1e-12);
}

TEST(Blend, PartitionOfUnityPreservesAffineRow) {
  const BoneTransforms bt = compute_bone_transforms(chain(4), avsplat::testing::random_pose(4, 9, 1.0));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 50; ++i) {
    const SkinWeights w = SkinWeights::from_dense(std::vector<double>{u(rng), u(rng), u(rng), u(rng)});
    const Mat4 a = blend_transform(w, bt);
    EXPECT_LT((a.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm(), 1e-15);
  }
}

TEST(Deform, IdentityPoseIsNeutral) {
  const BoneTransforms bt = compute_bone_transforms(chain(3), Pose::identity(3));
  const SkinWeights w = SkinWeights::from_dense(std::vector<double>{0.2, 0.5, 0.3});
  const Vec3 x(0.3, -0.1, 0.7);
  EXPECT_LT((deform_point(x, w, bt) - x).norm(), 1e-12);
  const Mat3 r = axis_rotation(Vec3(1, 1, 0), 0.4);
  EXPECT_LT((deform_rotation(r, w, bt) - r).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Deform, OneHotTranslation) {
  BoneTransforms bt;
  bt.bones = {Mat4::Identity(), translate(Vec3(0.5, -1, 2))};
  EXPECT_LT((deform_point(Vec3(1, 1, 1), SkinWeights::one_hot(1), bt) - Vec3(1.5, 0, 3)).norm(), 1e-15);
}

TEST(Deform, MatchesPerBoneExpansion) {
  const BoneTransforms bt = compute_bone_transforms(chain(3), avsplat::testing::random_pose(3, 21, 1.0));
  const SkinWeights w = SkinWeights::from_dense(std::vector<double>{0.2, 0.5, 0.3});
  const Vec3 x(0.3, -0.1, 0.7);
  Vec3 expect = Vec3::Zero();
  for (int k = 0; k < w.count; ++k)
    expect += w.weight[k] * (bt.bones[w.bone[k]] * x.homogeneous()).head<3>();
  EXPECT_LT((deform_point(x, w, bt) - expect).norm(), 1e-12);
}

TEST(Deform, RigidOneHotRotationStaysOrthonormal) {
  const BoneTransforms bt = compute_bone_transforms(chain(3), avsplat::testing::random_pose(3, 2, 1.0));
  const Mat3 rc = axis_rotation(Vec3(0.2, 1, 0.3), 1.1);
  const Mat3 rt = deform_rotation(rc, SkinWeights::one_hot(2), bt);
  EXPECT_LT((rt - bt.bones[2].topLeftCorner<3, 3>() * rc).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((rt * rt.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Deform, ConvexCombinationOfBoneImages) {
  // A deformed point lies in the convex hull of its per-bone images.
  const BoneTransforms bt = compute_bone_transforms(chain(2), avsplat::testing::random_pose(2, 8, 1.0));
  const Vec3 x(0.2, 0.1, -0.3);
  const Vec3 p0 = (bt.bones[0] * x.homogeneous()).head<3>();
  const Vec3 p1 = (bt.bones[1] * x.homogeneous()).head<3>();
  for (double t : {0.0, 0.25, 0.6, 1.0}) {
    const SkinWeights w = SkinWeights::from_dense(std::vector<double>{1.0 - t + 1e-300, t + 1e-300});
    const Vec3 y = deform_point(x, w, bt);
    EXPECT_LT((y - ((1 - t) * p0 + t * p1)).norm(), 1e-12);
  }
}

TEST(ViewDirection, IdentityPoseIsNeutral) {
  const BoneTransforms bt = compute_bone_transforms(chain(3), Pose::identity(3));
  const Vec3 d = Vec3(1, 2, -0.5).normalized();
  const CanonicalDirection c = canonicalize_direction(d, SkinWeights::one_hot(1), bt);
  EXPECT_FALSE(c.singular);
  EXPECT_LT((c.direction - d).norm(), 1e-12);
}

TEST(ViewDirection, InverseOfQuarterTurn) {
  BoneTransforms bt;
  bt.bones = {rotate(axis_rotation(Vec3::UnitZ(), M_PI / 2))};
  const CanonicalDirection c = canonicalize_direction(Vec3(1, 0, 0), SkinWeights::one_hot(0), bt);
  EXPECT_LT((c.direction - Vec3(0, -1, 0)).norm(), 1e-12);
}

TEST(ViewDirection, SingularBlendPassesThrough) {
  BoneTransforms bt;
  bt.bones = {rotate(axis_rotation(Vec3::UnitZ(), M_PI)), Mat4::Identity()};
  // Half of a half-turn plus half identity collapses x and y.
  const SkinWeights w = SkinWeights::from_dense(std::vector<double>{0.5, 0.5});
  const Vec3 d = Vec3(0.6, 0.8, 0);
  const CanonicalDirection c = canonicalize_direction(d, w, bt);
  EXPECT_TRUE(c.singular);
  EXPECT_EQ(c.direction, d);
}

TEST(ViewDirection, ResultIsUnitLength) {
  const BoneTransforms bt = compute_bone_transforms(chain(3), avsplat::testing::random_pose(3, 6, 1.0));
  const SkinWeights w = SkinWeights::from_dense(std::vector<double>{0.3, 0.3, 0.4});
  const CanonicalDirection c = canonicalize_direction(Vec3(0, 0.6, 0.8), w, bt);
  EXPECT_NEAR(c.direction.norm(), 1.0, 1e-12);
}
