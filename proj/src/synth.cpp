#include "avsplat/synth.hpp"

#include "avsplat/image_io.hpp"
#include "avsplat/pipeline.hpp"
#include "avsplat/template_io.hpp"
#include "json_util.hpp"

#include <random>

namespace avsplat {

using detail::json;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// The avatar is one capsule along +y split into equal bone segments.
struct Body {
  int bones;
  double length, radius;
  double y0; // bottom of the first segment

  double height() const { return bones * length; }
  double area() const { return 2 * M_PI * radius * height() + 4 * M_PI * radius * radius; }

  // s in [0, 1) walks the surface by area; theta is the azimuth.
  Vec3 surface(double s, double theta) const {
    const double cap = 2 * M_PI * radius * radius;
    double a = s * area();
    const double c = std::cos(theta), sn = std::sin(theta);
    if (a < cap) {
      const double cphi = 1.0 - a / cap;
      const double sphi = std::sqrt(std::max(0.0, 1.0 - cphi * cphi));
      return {radius * sphi * c, y0 - radius * cphi, radius * sphi * sn};
    }
    a -= cap;
    const double side = 2 * M_PI * radius * height();
    if (a < side)
      return {radius * c, y0 + a / (2 * M_PI * radius), radius * sn};
    a -= side;
    const double cphi = std::max(-1.0, 1.0 - a / cap);
    const double sphi = std::sqrt(std::max(0.0, 1.0 - cphi * cphi));
    return {radius * sphi * c, y0 + height() + radius * cphi, radius * sphi * sn};
  }

  Vec2 uv(const Vec3 &p) const {
    const double u = std::atan2(p.z(), p.x()) / kTwoPi + 0.5;
    const double v = (p.y() - (y0 - radius)) / (height() + 2 * radius);
    return {std::clamp(u, 0.0, 1.0), std::clamp(v, 0.0, 1.0)};
  }

  // Radial distance is shared by all segments, so only the axial gap matters.
  SkinWeights weights(const Vec3 &p) const {
    std::vector<double> dense(static_cast<std::size_t>(bones));
    const double sigma = 0.25 * length;
    for (int b = 0; b < bones; ++b) {
      const double lo = y0 + b * length;
      const double dy = std::clamp(p.y(), lo, lo + length) - p.y();
      dense[std::size_t(b)] = std::exp(-dy * dy / (2 * sigma * sigma));
    }
    return SkinWeights::from_dense(dense);
  }
};

Skeleton make_skeleton(const Body &body) {
  Skeleton s;
  for (int b = 0; b < body.bones; ++b) {
    s.parent.push_back(b - 1);
    const Vec3 j = b == 0 ? Vec3(0, body.y0, 0) : Vec3(0, body.length, 0);
    s.joints.insert(s.joints.end(), {j.x(), j.y(), j.z()});
  }
  return s;
}

FieldBankConfig ground_truth_fields() {
  FieldBankConfig fc;
  const HashGridConfig small{4, 2, 3, 12, 10};
  fc.sh_grid = fc.displacement_grid = fc.ao_grid = small;
  fc.hidden_width = 16;
  fc.hidden_layers = 2;
  return fc;
}

// Random smooth SH field: O(1) hash features through a random MLP head.
void randomize_sh(NeuralField &f, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> table(-1.0, 1.0);
  for (double &v : f.grid.params())
    v = table(rng);
  const int out = f.mlp.layer_count() - 1;
  auto w = f.mlp.weight(out);
  auto b = f.mlp.bias(out);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    // Row 3k + c holds coefficient k of channel c; keep view dependence mild.
    const double scale = i < 3 ? 1.0 : 0.25;
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      w(i, j) = scale * u(rng);
    b[i] = i < 3 ? 0.6 * u(rng) : 0.0;
  }
}

// ao(t) = sigmoid(c + d sin(2 pi t)) through two ReLU layers carrying +-sin.
void craft_ao(NeuralField &f, int time_frequencies, double mean, double dimming) {
  if (time_frequencies < 2)
    throw Error(ErrorCode::Configuration, "the AO pattern needs at least 2 time frequencies");
  std::fill(f.mlp.params().begin(), f.mlp.params().end(), 0.0);
  const int sin_2pi = f.grid.config().output_width() + 2; // (sin pi t, cos pi t, sin 2 pi t, ...)
  const double lo = std::clamp(mean * (1.0 - dimming), 1e-3, 1.0 - 1e-3);
  const double hi = std::clamp(mean * (1.0 + dimming), 1e-3, 1.0 - 1e-3);
  const double c = 0.5 * (logit(hi) + logit(lo)), d = 0.5 * (logit(hi) - logit(lo));
  f.mlp.weight(0)(0, sin_2pi) = 1.0;
  f.mlp.weight(0)(1, sin_2pi) = -1.0;
  for (int l = 1; l < f.mlp.layer_count() - 1; ++l) {
    f.mlp.weight(l)(0, 0) = 1.0;
    f.mlp.weight(l)(1, 1) = 1.0;
  }
  const int out = f.mlp.layer_count() - 1;
  f.mlp.weight(out)(0, 0) = d;
  f.mlp.weight(out)(0, 1) = -d;
  f.mlp.bias(out)[0] = c;
}

SkinnedGaussianModel make_ground_truth(const SynthConfig &cfg, const Body &body, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  SkinnedGaussianModel m;
  m.skeleton = make_skeleton(body);
  const std::size_t n = std::size_t(cfg.points);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = body.surface(u01(rng), kTwoPi * u01(rng));
    m.centers.insert(m.centers.end(), {p.x(), p.y(), p.z()});
    Vec4 q(normal(rng), normal(rng), normal(rng), normal(rng));
    q.normalize();
    m.rotations.insert(m.rotations.end(), {q[0], q[1], q[2], q[3]});
    for (int a = 0; a < 3; ++a)
      m.log_scales.push_back(std::log(0.012 + 0.012 * u01(rng)));
    m.opacity_logits.push_back(1.0 + 2.0 * u01(rng));
    m.skin.push_back(body.weights(p));
    if (cfg.uv) {
      const Vec2 t = body.uv(p);
      m.uv.insert(m.uv.end(), {t.x(), t.y()});
    }
  }
  const FieldBankConfig fc = ground_truth_fields();
  Aabb box;
  const double pad = body.radius + 0.2;
  box.min = Vec3(-pad, body.y0 - pad, -pad);
  box.max = Vec3(pad, body.y0 + body.height() + pad, pad);
  m.fields = FieldBank(fc, box, seed ^ 0xa5a5a5a5ULL);
  randomize_sh(m.fields.sh, rng);
  if (cfg.ao_dimming > 0.0) {
    craft_ao(m.fields.ao, fc.time_frequencies, cfg.ao_mean, cfg.ao_dimming);
    m.ao_active = true;
  }
  m.validate();
  return m;
}

Pose make_pose(const SynthConfig &cfg, double t, const std::vector<double> &phase, double x_offset) {
  Pose p = Pose::identity(cfg.bones, t);
  const double a = cfg.motion_amplitude;
  auto wave = [&](int k) { return std::sin(kTwoPi * t + phase[std::size_t(k)]); };
  for (int b = 0; b < cfg.bones; ++b) {
    const int k = 3 * b;
    if (b == 0)
      p.euler[0] = Vec3(0.2 * a * wave(k), 0.6 * a * wave(k + 1), 0.2 * a * wave(k + 2));
    else
      p.euler[std::size_t(b)] = Vec3(0.4 * a * wave(k), 0.2 * a * wave(k + 1), a * wave(k + 2));
  }
  const int k = 3 * cfg.bones;
  p.translation = Vec3(x_offset + 0.05 * wave(k), 0.03 * wave(k + 1), 0.0);
  return p;
}

json config_json(const SynthConfig &c) {
  return json{{"bones", c.bones},
              {"points", c.points},
              {"template_vertices", c.template_vertices},
              {"cameras", c.cameras},
              {"test_cameras", c.test_cameras},
              {"frames", c.frames},
              {"width", c.width},
              {"height", c.height},
              {"focal", c.focal},
              {"camera_distance", c.camera_distance},
              {"bone_length", c.bone_length},
              {"limb_radius", c.limb_radius},
              {"motion_amplitude", c.motion_amplitude},
              {"ao_dimming", c.ao_dimming},
              {"ao_mean", c.ao_mean},
              {"template_noise", c.template_noise},
              {"uv", c.uv},
              {"avatars", c.avatars},
              {"avatar_spacing", c.avatar_spacing},
              {"background", detail::to_json(c.background)},
              {"seed", c.seed}};
}

} // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string &key, const std::string &msg) {
    throw Error(ErrorCode::Configuration, "synth." + key + ": " + msg);
  };
  if (bones < 1)
    fail("bones", "must be >= 1");
  if (points < 1)
    fail("points", "must be >= 1");
  if (template_vertices < 1)
    fail("template_vertices", "must be >= 1");
  if (cameras < 1)
    fail("cameras", "must be >= 1");
  if (test_cameras < 0)
    fail("test_cameras", "must be >= 0");
  if (frames < 1)
    fail("frames", "must be >= 1");
  if (width < 1 || height < 1)
    fail("width", "image size must be positive");
  if (!(focal > 0.0) || !(camera_distance > 0.0) || !(bone_length > 0.0) || !(limb_radius > 0.0))
    fail("focal", "focal, camera_distance, bone_length and limb_radius must be positive");
  if (!(ao_dimming >= 0.0 && ao_dimming < 1.0))
    fail("ao_dimming", "must be in [0, 1)");
  if (!(ao_mean > 0.0 && ao_mean < 1.0))
    fail("ao_mean", "must be in (0, 1)");
  if (!(template_noise >= 0.0))
    fail("template_noise", "must be >= 0");
  if (avatars < 1)
    fail("avatars", "must be >= 1");
}

std::string ground_truth_name(int avatar) {
  return avatar == 0 ? "ground_truth.ckpt" : "ground_truth_a" + std::to_string(avatar) + ".ckpt";
}

SynthScene generate_synthetic_scene(const SynthConfig &cfg) {
  cfg.validate();
  const Body body{cfg.bones, cfg.bone_length, cfg.limb_radius, -0.5 * cfg.bones * cfg.bone_length};
  SynthScene scene;

  // Template: a golden-angle lattice over the capsule surface.
  TemplateModel &clean = scene.clean_template;
  clean.skeleton = make_skeleton(body);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < cfg.template_vertices; ++k) {
    const Vec3 p = body.surface((k + 0.5) / cfg.template_vertices, golden * k);
    clean.vertices.insert(clean.vertices.end(), {p.x(), p.y(), p.z()});
    clean.weights.push_back(body.weights(p));
    if (cfg.uv) {
      const Vec2 t = body.uv(p);
      clean.uv.insert(clean.uv.end(), {t.x(), t.y()});
    }
  }
  clean.validate_and_normalize();
  scene.template_model = clean;
  std::mt19937_64 noise_rng(cfg.seed ^ 0x7e3779b1ULL);
  std::normal_distribution<double> noise(0.0, 1.0);
  if (cfg.template_noise > 0.0)
    for (double &v : scene.template_model.vertices)
      v += cfg.template_noise * noise(noise_rng);

  for (int a = 0; a < cfg.avatars; ++a) {
    Checkpoint ck;
    ck.model = make_ground_truth(cfg, body, cfg.seed * 1000003ULL + std::uint64_t(a));
    ck.seed = cfg.seed;
    ck.config_json = config_json(cfg).dump();
    scene.ground_truth.push_back(std::move(ck));
  }

  Dataset &ds = scene.dataset;
  ds.avatar_count = cfg.avatars;
  ds.bone_count = cfg.bones;
  ds.background = cfg.background;
  const double ring = std::max(0.0, 0.5 * (cfg.avatars - 1) * cfg.avatar_spacing);
  const double dist = cfg.camera_distance + ring;
  const int total_cams = cfg.cameras + cfg.test_cameras;
  for (int c = 0; c < total_cams; ++c) {
    const bool test = c >= cfg.cameras;
    const double az = test ? kTwoPi * (c - cfg.cameras + 0.5) / std::max(cfg.test_cameras, 1) + M_PI / cfg.cameras
                           : kTwoPi * c / cfg.cameras;
    const double h = test ? 0.5 : 0.2;
    const Vec3 eye(dist * std::sin(az), h, dist * std::cos(az));
    DatasetCamera dc;
    dc.id = "cam" + std::to_string(c);
    dc.split = test ? "test" : "train";
    dc.camera = Camera::look_at(eye, Vec3::Zero(), Vec3::UnitY(), cfg.focal, cfg.focal, cfg.width, cfg.height);
    ds.cameras.push_back(dc);
  }

  std::mt19937_64 rng(cfg.seed ^ 0x51ed2701ULL);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  std::vector<std::vector<double>> phases(std::size_t(cfg.avatars));
  for (auto &ph : phases)
    for (int k = 0; k < 3 * cfg.bones + 2; ++k)
      ph.push_back(u(rng));

  for (int f = 0; f < cfg.frames; ++f) {
    DatasetFrame fr;
    fr.timestamp = f / 24.0;
    const double t = cfg.frames > 1 ? double(f) / (cfg.frames - 1) : 0.0;
    for (int a = 0; a < cfg.avatars; ++a)
      fr.poses.push_back(make_pose(cfg, t, phases[std::size_t(a)], (a - 0.5 * (cfg.avatars - 1)) * cfg.avatar_spacing));
    for (int c = 0; c < total_cams; ++c)
      fr.images.push_back(dataset_image_name(c, f));
    ds.frames.push_back(std::move(fr));
  }
  // Poses carry the same normalized times a reload would compute.
  std::vector<double> stamps;
  for (const DatasetFrame &fr : ds.frames)
    stamps.push_back(fr.timestamp);
  const std::vector<double> times = normalize_timestamps(stamps);
  for (std::size_t f = 0; f < ds.frames.size(); ++f)
    for (Pose &p : ds.frames[f].poses)
      p.time = times[f];

  std::vector<const SkinnedGaussianModel *> models;
  for (const Checkpoint &ck : scene.ground_truth)
    models.push_back(&ck.model);
  ds.images.resize(ds.frames.size());
  for (int f = 0; f < cfg.frames; ++f)
    for (int c = 0; c < total_cams; ++c)
      ds.images[std::size_t(f)].push_back(quantize_srgb8(render_dataset_view(ds, models, c, f, true).view()));
  return scene;
}

SynthScene generate_synthetic_dataset(const SynthConfig &cfg, const std::filesystem::path &dir) {
  SynthScene scene = generate_synthetic_scene(cfg);
  std::filesystem::create_directories(dir);
  scene.dataset.root = dir;
  save_dataset(scene.dataset, dir);
  save_template(scene.template_model, dir / "template.json");
  for (std::size_t a = 0; a < scene.ground_truth.size(); ++a)
    save_checkpoint(scene.ground_truth[a], dir / ground_truth_name(static_cast<int>(a)));
  detail::write_text_file(dir / "synth.json", config_json(cfg).dump(2) + "\n");
  return scene;
}

} // namespace avsplat
