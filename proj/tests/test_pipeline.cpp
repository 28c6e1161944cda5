#include "avsplat/pipeline.hpp"
#include "avsplat/shading.hpp"

#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace avsplat;
using namespace avsplat::testing;

namespace {

GradScene make_grad_scene(std::uint64_t seed, int points = 10, int bones = 2) {
  GradScene s;
  s.model = random_model(points, bones, seed, 0.35);
  s.pose = random_pose(bones, seed + 1, 0.3);
  s.camera = test_camera(32, 32, 40.0);
  s.target = Image(32, 32);
  std::mt19937_64 rng(seed + 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double &v : s.target.data)
    v = u(rng);
  return s;
}

} // namespace

TEST(Pipeline, GradientsMatchFiniteDifferences) {
  GradScene s = make_grad_scene(1);
  const GradCheckResult r = check_scene_gradients(s, 1e-4, 12, 7);
  for (const auto &[name, worst] : r.worst) {
    EXPECT_LT(worst, 1e-3) << name;
  }
  for (const GradCheckEntry &e : r.entries)
    if (e.rel > 1e-3)
      ADD_FAILURE() << e.block << "[" << e.index << "] analytic " << e.analytic << " numeric " << e.numeric;
  EXPECT_EQ(r.checked.size(), 12u); // 11 blocks + root translation
}

namespace {

void give_uv_atlas(SkinnedGaussianModel &m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  m.sh_mode = ShMode::Uv;
  m.fields.atlas = UvAtlas(4, 4);
  for (double &v : m.fields.atlas->params())
    v = u(rng) - 0.5;
  m.uv.clear();
  for (std::size_t i = 0; i < m.size(); ++i)
    m.uv.insert(m.uv.end(), {u(rng), u(rng)});
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

} // namespace

TEST(Pipeline, GradientsAcrossSeedsAndBoneCounts) {
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    GradScene s = make_grad_scene(seed, seed % 2 ? 30 : 10, 2 + int(seed % 3));
    const GradCheckResult r = check_scene_gradients(s, 1e-4, 8, seed);
    for (const auto &[name, worst] : r.worst)
      EXPECT_LT(worst, 1e-3) << name << " seed " << seed;
  }
}

TEST(Pipeline, UvModeGradients) {
  GradScene s = make_grad_scene(21);
  give_uv_atlas(s.model, 3);
  const GradCheckResult r = check_scene_gradients(s, 1e-4, 12, 4);
  ASSERT_TRUE(r.worst.count("atlas"));
  for (const auto &[name, worst] : r.worst)
    EXPECT_LT(worst, 1e-3) << name;
  // In UV mode the SH field is not sampled, so it gets no gradient.
  const ModelGradients g = scene_gradients(s);
  EXPECT_TRUE(g.sh_table.touched().empty());
  for (double v : g.sh_mlp)
    EXPECT_EQ(v, 0.0);
}

TEST(Pipeline, InactiveAoHasNoGradientAndUnitAo) {
  GradScene s = make_grad_scene(22);
  s.model.ao_active = false;
  const ModelGradients g = scene_gradients(s);
  EXPECT_TRUE(g.ao_table.touched().empty());
  for (double v : g.ao_mlp)
    EXPECT_EQ(v, 0.0);
  const AvatarInstance inst{&s.model, s.pose, true};
  const SceneForward fwd = render_forward(std::span(&inst, 1), s.camera, s.background);
  for (double a : fwd.avatars[0].ao)
    EXPECT_EQ(a, 1.0);
}

TEST(Pipeline, NoAoFlagMatchesInactiveModel) {
  GradScene s = make_grad_scene(23);
  const AvatarInstance off{&s.model, s.pose, false};
  const FrameBuffers a = render_avatars(std::span(&off, 1), s.camera, s.background);
  SkinnedGaussianModel inactive = s.model;
  inactive.ao_active = false;
  const AvatarInstance on{&inactive, s.pose, true};
  const FrameBuffers b = render_avatars(std::span(&on, 1), s.camera, s.background);
  EXPECT_EQ(a.color, b.color);
  const AvatarInstance with{&s.model, s.pose, true};
  EXPECT_NE(render_avatars(std::span(&with, 1), s.camera, s.background).color, a.color);
}

TEST(Pipeline, PointSamplingMatchesRenderer) {
  GradScene s = make_grad_scene(24);
  const AvatarInstance inst{&s.model, s.pose, true};
  const SceneForward fwd = render_forward(std::span(&inst, 1), s.camera, s.background);
  for (std::size_t i = 0; i < s.model.size(); ++i) {
    const SkinnedGaussian p = s.model.point(i, s.pose.time);
    EXPECT_LT((p.displacement - (fwd.avatars[0].shifted[i] - s.model.geometry(i).center)).norm(), 1e-14);
    EXPECT_NEAR(p.ao, fwd.avatars[0].ao[i], 1e-14);
  }
}

TEST(Pipeline, SplatsMatchManualDeformation) {
  GradScene s = make_grad_scene(25);
  const AvatarInstance inst{&s.model, s.pose, true};
  const SceneForward fwd = render_forward(std::span(&inst, 1), s.camera, s.background);
  const BoneTransforms bt = compute_bone_transforms(s.model.skeleton, s.pose);
  for (std::size_t i = 0; i < s.model.size(); ++i) {
    const int k = fwd.avatars[0].points[i].splat;
    if (k < 0)
      continue;
    const SkinnedGaussian p = s.model.point(i, s.pose.time);
    const Vec3 x = deform_point(p.geometry.center + p.displacement, p.skin, bt);
    const Mat3 r = deform_rotation(quaternion_to_matrix(p.geometry.rotation), p.skin, bt);
    const Mat3 cov = r * p.geometry.scale().array().square().matrix().asDiagonal() * r.transpose();
    const auto proj = project_gaussian(x, cov, s.camera);
    ASSERT_TRUE(proj);
    EXPECT_LT((proj->mean - fwd.splats[k].mean).norm(), 1e-10);
    EXPECT_LT((proj->cov - fwd.splats[k].cov).norm(), 1e-9);
    const Vec3 dir = (x - s.camera.center()).normalized();
    const CanonicalDirection dc = canonicalize_direction(dir, p.skin, bt);
    const Vec3 rgb = apply_ao(p.ao, eval_sh(p.sh, dc.direction));
    EXPECT_LT((rgb - fwd.splats[k].color).norm(), 1e-12);
    EXPECT_NEAR(fwd.splats[k].opacity, p.geometry.opacity(), 1e-15);
  }
}

TEST(MultiAvatar, SingleAvatarMatchesDirectRaster) {
  GradScene s = make_grad_scene(30, 40);
  const AvatarInstance inst{&s.model, s.pose, true};
  const SceneForward fwd = render_forward(std::span(&inst, 1), s.camera, s.background);
  const FrameBuffers ref = reference_rasterize(fwd.splats, s.camera, s.background);
  EXPECT_LT(max_abs_diff(fwd.buffers.color, ref.color), 1e-12);
  EXPECT_EQ(render_avatars(std::span(&inst, 1), s.camera, s.background).color, fwd.buffers.color);
}

TEST(MultiAvatar, OverlappingMatchesReferenceOnConcatenatedSplats) {
  GradScene a = make_grad_scene(31, 60), b = make_grad_scene(32, 60);
  b.pose.translation += Vec3(0.15, 0.0, 0.05);
  const std::vector<AvatarInstance> both{{&a.model, a.pose, true}, {&b.model, b.pose, true}};
  const SceneForward fwd = render_forward(both, a.camera, a.background);
  const FrameBuffers ref = reference_rasterize(fwd.splats, a.camera, a.background);
  EXPECT_LT(max_abs_diff(fwd.buffers.color, ref.color), 1e-6);
  // The concatenation holds exactly each avatar's own splats.
  const SceneForward fa = render_forward(std::span(&both[0], 1), a.camera, a.background);
  const SceneForward fb = render_forward(std::span(&both[1], 1), a.camera, a.background);
  EXPECT_EQ(fwd.splats.size(), fa.splats.size() + fb.splats.size());
}

TEST(MultiAvatar, DisjointAvatarsComposeRegionwise) {
  GradScene a = make_grad_scene(33, 20), b = make_grad_scene(34, 20);
  a.model = random_model(20, 2, 33, 0.1);
  b.model = random_model(20, 2, 34, 0.1);
  a.pose = Pose::identity(2);
  b.pose = Pose::identity(2);
  a.pose.translation = Vec3(-0.6, 0, 0);
  b.pose.translation = Vec3(0.6, 0, 0);
  Camera cam = Camera::look_at(Vec3(0, 0, 3), Vec3::Zero(), Vec3::UnitY(), 40, 40, 64, 32);
  const Vec3 bg(0.1, 0.1, 0.1);
  const std::vector<AvatarInstance> both{{&a.model, a.pose, true}, {&b.model, b.pose, true}};
  const FrameBuffers all = render_avatars(both, cam, bg);
  const FrameBuffers left = render_avatars(std::span(&both[0], 1), cam, bg);
  const FrameBuffers right = render_avatars(std::span(&both[1], 1), cam, bg);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) {
      const Vec3 expect = x < 32 ? left.pixel(x, y) : right.pixel(x, y);
      EXPECT_LT((all.pixel(x, y) - expect).norm(), 1e-12) << x << "," << y;
      // The opposite half is untouched background in the single-avatar renders.
      const Vec3 other = x < 32 ? right.pixel(x, y) : left.pixel(x, y);
      EXPECT_LT((other - bg).norm(), 1e-12) << x << "," << y;
    }
}

TEST(MultiAvatar, BackwardSplitsGradientsPerAvatar) {
  GradScene a = make_grad_scene(35, 10), b = make_grad_scene(36, 10);
  b.pose.translation += Vec3(0.1, 0, 0);
  const std::vector<AvatarInstance> both{{&a.model, a.pose, true}, {&b.model, b.pose, true}};
  auto loss = [&](std::vector<double> *d) {
    const FrameBuffers fb = render_avatars(both, a.camera, a.background);
    return total_loss(ImageView{fb.width, fb.height, fb.color}, a.target.view(), {}, d);
  };
  std::vector<double> d;
  loss(&d);
  const SceneForward fwd = render_forward(both, a.camera, a.background);
  ModelGradients ga(a.model), gb(b.model);
  ModelGradients *gs[2] = {&ga, &gb};
  render_backward(fwd, both, d, gs);
  for (std::size_t i = 0; i < 6; ++i) {
    double &x = b.model.opacity_logits[i];
    const double fd = central_difference([&] { return loss(nullptr); }, x, 1e-6);
    EXPECT_LT(rel_err(gb.opacity_logits[i], fd, 1e-7), 1e-4) << i;
    double &y = a.model.centers[3 * i + 1];
    const double fd2 = central_difference([&] { return loss(nullptr); }, y, 1e-6);
    EXPECT_LT(rel_err(ga.centers[3 * i + 1], fd2, 1e-7), 1e-4) << i;
  }
}

TEST(Pipeline, ThreadedRenderAndBackwardAreBitIdentical) {
  GradScene s = make_grad_scene(40, 80);
  ThreadPool pool(3);
  std::vector<double> d;
  SceneForward f1;
  scene_loss(s, &d, &f1);
  const AvatarInstance inst{&s.model, s.pose, true};
  const SceneForward f3 = render_forward(std::span(&inst, 1), s.camera, s.background, {{}, &pool});
  EXPECT_EQ(f1.buffers.color, f3.buffers.color);
  ModelGradients g1(s.model), g3(s.model);
  ModelGradients *p1 = &g1, *p3 = &g3;
  render_backward(f1, std::span(&inst, 1), d, std::span(&p1, 1));
  render_backward(f3, std::span(&inst, 1), d, std::span(&p3, 1), {{}, &pool});
  EXPECT_EQ(g1.centers, g3.centers);
  EXPECT_EQ(g1.sh_mlp, g3.sh_mlp);
  EXPECT_EQ(g1.joints, g3.joints);
  const auto v1 = g1.ao_table.values(), v3 = g3.ao_table.values();
  EXPECT_TRUE(std::equal(v1.begin(), v1.end(), v3.begin()));
}
