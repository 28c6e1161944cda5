#include "avsplat/pipeline.hpp"

#include "avsplat/shading.hpp"

namespace avsplat {

namespace {

Eigen::MatrixXd unit_positions(const Aabb &box, const std::vector<Vec3> &xs) {
  Eigen::MatrixXd u(3, Eigen::Index(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i)
    u.col(Eigen::Index(i)) = box.to_unit(xs[i]);
  return u;
}

Eigen::MatrixXd time_inputs(double t, int n_freq, Eigen::Index n) {
  const std::vector<double> g = positional_encode_time(t, n_freq);
  Eigen::MatrixXd m(Eigen::Index(g.size()), n);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    m.row(r).setConstant(g[std::size_t(r)]);
  return m;
}

void forward_avatar(const AvatarInstance &inst, AvatarForward &af) {
  const SkinnedGaussianModel &m = *inst.model;
  const FieldBank &f = m.fields;
  const std::size_t n = m.size();
  const double max_dx = f.config().max_displacement;

  std::vector<Vec3> centers(n);
  for (std::size_t i = 0; i < n; ++i)
    centers[i] = vec3_at(std::span<const double>(m.centers), i);

  af.dx_raw = f.displacement.forward(unit_positions(f.bounds, centers), nullptr, &af.dx_batch);
  af.shifted.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    af.shifted[i] = centers[i] + (af.dx_raw.col(Eigen::Index(i)).array().tanh() * max_dx).matrix();

  const Eigen::MatrixXd unit_shifted = unit_positions(f.bounds, af.shifted);
  if (m.sh_mode == ShMode::Uv) {
    if (!m.has_uv() || !f.atlas)
      throw Error(ErrorCode::Configuration, "sh_mode uv requires UV coordinates and an atlas; use sh_mode hash");
    af.sh.resize(kShScalars, Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i)
      sh_to_column(f.atlas->sample(Vec2(m.uv[2 * i], m.uv[2 * i + 1])), af.sh.col(Eigen::Index(i)));
  } else {
    af.sh = f.sh.forward(unit_shifted, nullptr, &af.sh_batch);
  }

  af.ao_on = m.ao_active && inst.use_ao;
  if (af.ao_on) {
    const Eigen::MatrixXd extra = time_inputs(inst.pose.time, f.config().time_frequencies, Eigen::Index(n));
    const Eigen::MatrixXd raw = f.ao.forward(unit_shifted, &extra, &af.ao_batch);
    af.ao = raw.row(0).transpose().unaryExpr([](double v) { return sigmoid(v); });
  } else {
    af.ao = Eigen::VectorXd::Ones(Eigen::Index(n));
  }

  af.bones = compute_bone_transforms(m.skeleton, inst.pose);
  af.points.assign(n, {});
}

void shade_points(const AvatarInstance &inst, const Camera &cam, const RenderOptions &opts, AvatarForward &af,
                  std::vector<Splat2D> &local) {
  const SkinnedGaussianModel &m = *inst.model;
  const Vec3 eye = cam.center();
  const std::size_t n = m.size();
  std::vector<std::uint8_t> keep(n, 0);
  local.assign(n, {});
  parallel_for(opts.pool, (n + 255) / 256, [&](std::size_t chunk) {
    for (std::size_t i = chunk * 256; i < std::min(n, chunk * 256 + 256); ++i) {
      AvatarForward::Point &p = af.points[i];
      const Mat4 a = blend_transform(m.skin[i], af.bones);
      p.blend = a.topRows<3>();
      const Mat3 lin = p.blend.leftCols<3>();
      p.posed = lin * af.shifted[i] + p.blend.col(3);
      p.rot_c = quaternion_to_matrix(vec4_at(std::span<const double>(m.rotations), i));
      p.m = lin * p.rot_c;
      const Vec3 s2 = (2.0 * vec3_at(std::span<const double>(m.log_scales), i)).array().exp();
      p.cov = p.m * s2.asDiagonal() * p.m.transpose();
      const auto proj = project_gaussian(p.posed, p.cov, cam, opts.raster);
      if (!proj)
        continue;
      const Vec3 r = p.posed - eye;
      p.view_len = r.norm();
      p.view = r / p.view_len;
      const CanonicalDirection dc = canonicalize_direction(p.view, lin);
      p.singular = dc.singular;
      p.dir_c = dc.direction;
      if (!dc.singular)
        p.v = lin.inverse() * p.view;
      const ShCoefficients sh = sh_from_column(af.sh.col(Eigen::Index(i)));
      Splat2D &s = local[i];
      s.mean = proj->mean;
      s.cov = proj->cov;
      s.depth = proj->depth;
      s.color = apply_ao(af.ao[Eigen::Index(i)], eval_sh(sh, p.dir_c));
      s.opacity = sigmoid(m.opacity_logits[i]);
      s.source = static_cast<int>(af.splat_offset + i);
      keep[i] = 1;
    }
  });
  std::size_t w = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i])
      local[w++] = local[i];
  local.resize(w);
}

} // namespace

SceneForward render_forward(std::span<const AvatarInstance> avatars, const Camera &cam, const Vec3 &background,
                            const RenderOptions &opts) {
  SceneForward sf;
  sf.camera = cam;
  sf.avatars.resize(avatars.size());
  std::size_t offset = 0;
  for (std::size_t a = 0; a < avatars.size(); ++a) {
    if (!avatars[a].model)
      throw Error(ErrorCode::InvalidParameter, "avatar instance without a model");
    AvatarForward &af = sf.avatars[a];
    af.splat_offset = offset;
    forward_avatar(avatars[a], af);
    std::vector<Splat2D> local;
    shade_points(avatars[a], cam, opts, af, local);
    for (const Splat2D &s : local) {
      const int point = s.source - static_cast<int>(offset);
      af.points[std::size_t(point)].splat = static_cast<int>(sf.splats.size());
      sf.owner.emplace_back(static_cast<int>(a), point);
      sf.splats.push_back(s);
    }
    offset += avatars[a].model->size();
  }
  sf.buffers = rasterize_forward(sf.splats, cam, background, opts.raster, opts.pool);
  return sf;
}

FrameBuffers render_avatars(std::span<const AvatarInstance> avatars, const Camera &cam, const Vec3 &background,
                            const RenderOptions &opts) {
  return render_forward(avatars, cam, background, opts).buffers;
}

void render_backward(const SceneForward &sf, std::span<const AvatarInstance> avatars, std::span<const double> d_image,
                     std::span<ModelGradients *const> grads, const RenderOptions &opts) {
  if (avatars.size() != sf.avatars.size() || grads.size() != avatars.size())
    throw Error(ErrorCode::Internal, "render_backward: avatar count does not match the forward pass");
  const std::vector<SplatGradients> sg = rasterize_backward(sf.splats, sf.buffers, d_image, opts.raster, opts.pool);
  const Camera &cam = sf.camera;

  for (std::size_t a = 0; a < avatars.size(); ++a) {
    const SkinnedGaussianModel &m = *avatars[a].model;
    const AvatarForward &af = sf.avatars[a];
    const FieldBank &f = m.fields;
    ModelGradients &g = *grads[a];
    const std::size_t n = m.size();
    const double max_dx = f.config().max_displacement;

    std::vector<Mat34> d_blend(n, Mat34::Zero());
    std::vector<Vec3> d_shifted(n, Vec3::Zero());
    Eigen::MatrixXd d_sh = Eigen::MatrixXd::Zero(kShScalars, Eigen::Index(n));
    Eigen::MatrixXd d_ao_raw = Eigen::MatrixXd::Zero(1, Eigen::Index(n));

    parallel_for(opts.pool, (n + 255) / 256, [&](std::size_t chunk) {
      for (std::size_t i = chunk * 256; i < std::min(n, chunk * 256 + 256); ++i) {
        const AvatarForward::Point &p = af.points[i];
        if (p.splat < 0)
          continue;
        const SplatGradients &s = sg[std::size_t(p.splat)];
        const double alpha0 = sigmoid(m.opacity_logits[i]);
        g.opacity_logits[i] += s.d_opacity * alpha0 * (1.0 - alpha0);

        const ShCoefficients sh = sh_from_column(af.sh.col(Eigen::Index(i)));
        const double ao = af.ao[Eigen::Index(i)];
        const ShadeGradients shade = shade_backward(sh, p.dir_c, ao, s.d_color);
        sh_to_column(shade.d_coeffs, d_sh.col(Eigen::Index(i)));
        if (af.ao_on)
          d_ao_raw(0, Eigen::Index(i)) = shade.d_ao * ao * (1.0 - ao);

        const Mat3 lin = p.blend.leftCols<3>();
        Mat3 d_lin = Mat3::Zero();
        Vec3 d_view;
        if (p.singular) {
          d_view = shade.d_direction;
        } else {
          const double vn = p.v.norm();
          const Vec3 dv = (shade.d_direction - p.dir_c * p.dir_c.dot(shade.d_direction)) / vn;
          const Mat3 inv_t = lin.inverse().transpose();
          d_lin -= inv_t * dv * p.v.transpose();
          d_view = inv_t * dv;
        }
        Vec3 d_posed = (d_view - p.view * p.view.dot(d_view)) / p.view_len;

        const ProjectionGradients pg = project_gaussian_backward(p.posed, p.cov, cam, s.d_mean, s.d_cov);
        d_posed += pg.d_position;

        const Vec3 log_s = vec3_at(std::span<const double>(m.log_scales), i);
        const Vec3 s2 = (2.0 * log_s).array().exp();
        const Mat3 gc = pg.d_cov;
        const Mat3 d_m = (gc + gc.transpose()) * p.m * s2.asDiagonal();
        const Mat3 mgm = p.m.transpose() * gc * p.m;
        for (int k = 0; k < 3; ++k)
          g.log_scales[3 * i + k] += 2.0 * s2[k] * mgm(k, k);

        d_lin += d_m * p.rot_c.transpose();
        const Mat3 d_rot = lin.transpose() * d_m;
        const Vec4 dq = quaternion_to_matrix_backward(vec4_at(std::span<const double>(m.rotations), i), d_rot);
        for (int k = 0; k < 4; ++k)
          g.rotations[4 * i + k] += dq[k];

        d_lin += d_posed * af.shifted[i].transpose();
        d_blend[i].leftCols<3>() = d_lin;
        d_blend[i].col(3) = d_posed;
        d_shifted[i] = lin.transpose() * d_posed;
      }
    });

    std::vector<Mat34> d_bones(std::size_t(m.skeleton.bone_count()), Mat34::Zero());
    for (std::size_t i = 0; i < n; ++i) {
      if (af.points[i].splat < 0)
        continue;
      const SkinWeights &w = m.skin[i];
      for (int k = 0; k < w.count; ++k)
        d_bones[std::size_t(w.bone[k])] += w.weight[k] * d_blend[i];
    }

    if (m.sh_mode == ShMode::Uv) {
      for (std::size_t i = 0; i < n; ++i)
        if (af.points[i].splat >= 0)
          f.atlas->backward(Vec2(m.uv[2 * i], m.uv[2 * i + 1]), sh_from_column(d_sh.col(Eigen::Index(i))), g.atlas);
    } else {
      const Eigen::MatrixXd d_unit = f.sh.backward(af.sh_batch, d_sh, g.sh_table, g.sh_mlp);
      for (std::size_t i = 0; i < n; ++i)
        d_shifted[i] += d_unit.col(Eigen::Index(i)).cwiseProduct(f.bounds.to_unit_derivative(af.shifted[i]));
    }
    if (af.ao_on) {
      const Eigen::MatrixXd d_unit = f.ao.backward(af.ao_batch, d_ao_raw, g.ao_table, g.ao_mlp);
      for (std::size_t i = 0; i < n; ++i)
        d_shifted[i] += d_unit.col(Eigen::Index(i)).cwiseProduct(f.bounds.to_unit_derivative(af.shifted[i]));
    }

    Eigen::MatrixXd d_dx_raw(3, Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto th = af.dx_raw.col(Eigen::Index(i)).array().tanh();
      d_dx_raw.col(Eigen::Index(i)) = d_shifted[i].array() * max_dx * (1.0 - th * th);
      for (int k = 0; k < 3; ++k)
        g.centers[3 * i + k] += d_shifted[i][k];
    }
    const Eigen::MatrixXd d_unit = f.displacement.backward(af.dx_batch, d_dx_raw, g.displacement_table,
                                                           g.displacement_mlp);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 c = vec3_at(std::span<const double>(m.centers), i);
      const Vec3 d = d_unit.col(Eigen::Index(i)).cwiseProduct(f.bounds.to_unit_derivative(c));
      for (int k = 0; k < 3; ++k)
        g.centers[3 * i + k] += d[k];
    }

    const PoseGradients pose_g = compute_bone_transforms_backward(m.skeleton, avatars[a].pose, d_bones);
    for (int b = 0; b < m.skeleton.bone_count(); ++b) {
      for (int k = 0; k < 3; ++k)
        g.joints[3 * std::size_t(b) + k] += pose_g.joints[std::size_t(b)][k];
      g.euler[std::size_t(b)] += pose_g.euler[std::size_t(b)];
    }
    g.translation += pose_g.translation;
  }
}

} // namespace avsplat
