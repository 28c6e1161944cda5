#include "avsplat/gaussian.hpp"

#include "test_util.hpp"

using namespace avsplat;
using avsplat::testing::central_difference;

TEST(Covariance, IdentityRotationGivesSquaredScales) {
  const Covariance3 c = build_covariance(Vec4(1, 0, 0, 0), Vec3(0, std::log(2.0), std::log(3.0)));
  const Mat3 expect = Vec3(1, 4, 9).asDiagonal();
  EXPECT_LT((c.matrix() - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Covariance, QuarterTurnAboutZSwapsAxes) {
  const Vec4 q = quaternion_from_axis_angle(Vec3::UnitZ(), M_PI / 2);
  const Covariance3 c = build_covariance(q, Vec3(0, std::log(2.0), 0));
  // R S^2 R^T by hand: R maps x -> y, so the 2 m axis along y lands on x.
  Mat3 r;
  r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Mat3 by_hand = r * Vec3(1, 4, 1).asDiagonal() * r.transpose();
  EXPECT_LT((c.matrix() - by_hand).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(c.matrix()(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(c.matrix()(1, 1), 1.0, 1e-12);
}

TEST(Covariance, RejectsNonFiniteInput) {
  try {
    build_covariance(Vec4(1, 0, NAN, 0), Vec3::Zero());
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidParameter);
  }
  EXPECT_THROW(build_covariance(Vec4(1, 0, 0, 0), Vec3(INFINITY, 0, 0)), Error);
}

TEST(Covariance, PositiveDefiniteForRandomInputs) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 200; ++i) {
    const Vec4 q(n(rng), n(rng), n(rng), n(rng));
    const Vec3 s(n(rng), n(rng), n(rng));
    const Mat3 m = build_covariance(q, s).matrix();
    EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat3> es(m);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
    // Eigenvalues are the squared scales.
    std::array<double, 3> ev{es.eigenvalues()[0], es.eigenvalues()[1], es.eigenvalues()[2]};
    std::array<double, 3> s2{std::exp(2 * s[0]), std::exp(2 * s[1]), std::exp(2 * s[2])};
    std::sort(s2.begin(), s2.end());
    for (int k = 0; k < 3; ++k)
      EXPECT_NEAR(ev[k], s2[k], 1e-9 * s2[k] + 1e-12);
  }
}

TEST(Quaternion, MatrixIsOrthonormalAndScaleInvariant) {
  const Vec4 q(0.3, -0.2, 0.7, 0.1);
  const Mat3 r = quaternion_to_matrix(q);
  EXPECT_LT((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  EXPECT_LT((quaternion_to_matrix(5.0 * q) - r).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(quaternion_to_matrix(Vec4::Zero()), Error);
}

TEST(Quaternion, BackwardMatchesFiniteDifferences) {
  Vec4 q(0.4, -0.3, 0.8, 0.2);
  Mat3 g;
  g << 0.3, -1.2, 0.5, 0.7, 0.1, -0.4, 0.9, 0.6, -0.8;
  const Vec4 analytic = quaternion_to_matrix_backward(q, g);
  for (int k = 0; k < 4; ++k) {
    const double fd =
        central_difference([&] { return quaternion_to_matrix(q).cwiseProduct(g).sum(); }, q[k], 1e-6);
    EXPECT_NEAR(analytic[k], fd, 1e-8);
  }
}

TEST(Opacity, PeakEqualsBaseOpacity) {
  GaussianGeometry g;
  g.center = Vec3(0.1, 0.2, 0.3);
  g.opacity_logit = logit(0.37);
  EXPECT_NEAR(gaussian_opacity_at(g, g.center), 0.37, 1e-15);
}

TEST(Opacity, UnitDistanceUnderIdentityCovariance) {
  GaussianGeometry g;
  g.opacity_logit = 50.0; // sigmoid saturates to 1 in double precision
  g.rotation = quaternion_from_axis_angle(Vec3(1, 2, 3), 0.7);
  const Vec3 dir = Vec3(0.3, -0.5, 0.2).normalized();
  EXPECT_NEAR(gaussian_opacity_at(g, dir), std::exp(-0.5), 1e-12);
  EXPECT_NEAR(gaussian_opacity_at(g, dir), 0.606531, 1e-6);
}

TEST(Opacity, ZeroBaseOpacityIsZeroEverywhere) {
  GaussianGeometry g;
  g.opacity_logit = -1e4;
  for (const Vec3 &x : {Vec3(0, 0, 0), Vec3(0.5, 0, 0), Vec3(3, -2, 1)})
    EXPECT_EQ(gaussian_opacity_at(g, x), 0.0);
}

TEST(Opacity, DegenerateScaleThrows) {
  GaussianGeometry g;
  g.log_scale = Vec3(0, 0, -40);
  try {
    gaussian_opacity_at(g, Vec3::Zero());
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateGaussian);
  }
}

TEST(SkinWeights, FromDenseKeepsFourLargestAndNormalizes) {
  const std::vector<double> dense{0.1, 0.5, 0.0, 0.3, 0.05, 0.4};
  const SkinWeights w = SkinWeights::from_dense(dense);
  ASSERT_EQ(w.count, 4);
  EXPECT_EQ(w.bone[0], 1);
  EXPECT_EQ(w.bone[1], 5);
  EXPECT_EQ(w.bone[2], 3);
  EXPECT_EQ(w.bone[3], 0);
  EXPECT_NEAR(w.sum(), 1.0, 1e-15);
  EXPECT_NEAR(w.weight[0], 0.5 / 1.3, 1e-15);
  EXPECT_NO_THROW(w.validate(6));
  EXPECT_THROW(w.validate(5), Error);
}

TEST(SkinWeights, ValidateRejectsBadRows) {
  SkinWeights w = SkinWeights::one_hot(0);
  w.weight[0] = 0.9;
  EXPECT_THROW(w.validate(1), Error);
  SkinWeights neg;
  neg.count = 2;
  neg.bone = {0, 1, 0, 0};
  neg.weight = {1.5, -0.5, 0, 0};
  EXPECT_THROW(neg.validate(2), Error);
  EXPECT_THROW(SkinWeights::from_dense(std::vector<double>{0.0, 0.0}), Error);
}
