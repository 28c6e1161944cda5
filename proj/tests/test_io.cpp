#include "avsplat/checkpoint.hpp"
#include "avsplat/dataset.hpp"
#include "avsplat/image_io.hpp"
#include "avsplat/init.hpp"
#include "avsplat/ply.hpp"
#include "avsplat/settings.hpp"
#include "avsplat/synth.hpp"
#include "avsplat/template_io.hpp"
#include "avsplat/train.hpp"

#include "test_util.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace avsplat;
using namespace avsplat::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path &p, const std::string &s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

json read_json(const fs::path &p) { return json::parse(slurp(p)); }
void write_json(const fs::path &p, const json &j) { spit(p, j.dump(2)); }

ErrorCode code_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an avsplat::Error";
  return ErrorCode::Internal;
}

std::string message_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.what();
  }
  return "";
}

// One camera, one frame, one avatar with a 2-bone skeleton.
Dataset minimal_dataset(int frames = 1, int avatars = 1) {
  Dataset ds;
  ds.avatar_count = avatars;
  ds.bone_count = 2;
  DatasetCamera cam;
  cam.id = "front";
  cam.camera = test_camera(8, 6, 10.0);
  ds.cameras.push_back(cam);
  for (int f = 0; f < frames; ++f) {
    DatasetFrame fr;
    fr.timestamp = 0.5 * f;
    for (int a = 0; a < avatars; ++a)
      fr.poses.push_back(random_pose(2, 10 * f + a));
    fr.images.push_back(dataset_image_name(0, f));
    ds.frames.push_back(fr);
    Image img(8, 6);
    for (std::size_t i = 0; i < img.data.size(); ++i)
      img.data[i] = double((i * 37 + f * 11) % 256) / 255.0;
    ds.images.push_back({quantize_srgb8(img.view())});
  }
  return ds;
}

const char *kToyTemplate = R"({
  "format": "avsplat-template", "version": 1, "vertex_count": 4,
  "parents": [-1, 0],
  "joints": [[0, 0, 0], [0, 1, 0]],
  "vertices": [[0, 0, 0], [0, 0.5, 0], [0, 1, 0], [0, 1.5, 0]],
  "skin_bones": [[0, -1, -1, -1], [0, 1, -1, -1], [0, 1, -1, -1], [1, -1, -1, -1]],
  "skin_weights": [[1, 0, 0, 0], [0.50002, 0.5, 0, 0], [0.3, 0.69999, 0, 0], [1, 0, 0, 0]]
})";

} // namespace

TEST(Srgb, RoundTripAndEndpoints) {
  EXPECT_EQ(srgb_to_linear(0.0), 0.0);
  EXPECT_NEAR(srgb_to_linear(1.0), 1.0, 1e-15);
  for (int c = 0; c < 256; ++c)
    EXPECT_EQ(encode_srgb8(srgb_to_linear(c / 255.0)), c);
  EXPECT_NEAR(linear_to_srgb(srgb_to_linear(0.37)), 0.37, 1e-12);
  EXPECT_EQ(encode_srgb8(-1.0), 0);
  EXPECT_EQ(encode_srgb8(2.0), 255);
}

TEST(Png, SaveLoadEqualsQuantize) {
  const fs::path dir = scratch_dir("png");
  Image img(7, 5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (double &v : img.data)
    v = u(rng);
  save_png(dir / "a.png", img.view());
  const Image back = load_png(dir / "a.png");
  EXPECT_EQ(back.width, 7);
  EXPECT_EQ(back.height, 5);
  EXPECT_EQ(back.data, quantize_srgb8(img.view()).data);
  // Deterministic bytes.
  save_png(dir / "b.png", img.view());
  EXPECT_EQ(slurp(dir / "a.png"), slurp(dir / "b.png"));
  EXPECT_EQ(code_of([&] { load_png(dir / "missing.png"); }), ErrorCode::Io);
  spit(dir / "bad.png", "not a png");
  EXPECT_THROW(load_png(dir / "bad.png"), Error);
}

TEST(Dataset, MinimalRoundTrip) {
  const fs::path dir = scratch_dir("ds_min");
  const Dataset ds = minimal_dataset();
  save_dataset(ds, dir);
  const Dataset back = load_dataset(dir);
  EXPECT_EQ(back.cameras.size(), 1u);
  EXPECT_EQ(back.frames.size(), 1u);
  EXPECT_EQ(back.bone_count, 2);
  EXPECT_EQ(back.cameras[0].id, "front");
  EXPECT_EQ(back.images[0][0].data, ds.images[0][0].data);
  EXPECT_LT((back.cameras[0].camera.rotation - ds.cameras[0].camera.rotation).norm(), 1e-15);
  EXPECT_EQ(back.frames[0].poses[0].euler, ds.frames[0].poses[0].euler);
  EXPECT_EQ(back.find_camera("front"), 0);
  EXPECT_EQ(back.find_camera("0"), 0);
  EXPECT_EQ(back.find_camera("back"), -1);
}

TEST(Dataset, TimestampsNormalized) {
  const fs::path dir = scratch_dir("ds_ts");
  save_dataset(minimal_dataset(3), dir);
  const Dataset ds = load_dataset(dir, false);
  EXPECT_EQ(ds.frames[0].poses[0].time, 0.0);
  EXPECT_EQ(ds.frames[1].poses[0].time, 0.5);
  EXPECT_EQ(ds.frames[2].poses[0].time, 1.0);
  EXPECT_TRUE(ds.images.empty());
  EXPECT_EQ(normalize_timestamps({3.0}), std::vector<double>{0.0});
}

TEST(Dataset, MissingAvatarPoseNamesFrame) {
  const fs::path dir = scratch_dir("ds_pose");
  save_dataset(minimal_dataset(2, 2), dir);
  json poses = read_json(dir / "poses.json");
  poses["frames"][1]["avatars"].erase(1);
  write_json(dir / "poses.json", poses);
  const std::string msg = message_of([&] { load_dataset(dir); });
  EXPECT_NE(msg.find("frame 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("avatar 1"), std::string::npos) << msg;
  EXPECT_EQ(code_of([&] { load_dataset(dir); }), ErrorCode::Schema);
}

TEST(Dataset, NonIncreasingTimestampsRejected) {
  const fs::path dir = scratch_dir("ds_mono");
  save_dataset(minimal_dataset(2), dir);
  json m = read_json(dir / "manifest.json");
  m["frames"][1]["timestamp"] = 0.0;
  write_json(dir / "manifest.json", m);
  const std::string msg = message_of([&] { load_dataset(dir); });
  EXPECT_NE(msg.find("increasing"), std::string::npos) << msg;
  EXPECT_NE(msg.find("frames[1]"), std::string::npos) << msg;
}

TEST(Dataset, MalformedInputsGiveDiagnostics) {
  const fs::path dir = scratch_dir("ds_bad");
  save_dataset(minimal_dataset(), dir);
  const json good = read_json(dir / "manifest.json");
  auto with = [&](const std::function<void(json &)> &edit) {
    json m = good;
    edit(m);
    write_json(dir / "manifest.json", m);
    return code_of([&] { load_dataset(dir); });
  };
  EXPECT_EQ(with([](json &m) { m["cameras"][0].erase("fx"); }), ErrorCode::Schema);
  EXPECT_EQ(with([](json &m) { m["cameras"][0]["rotation"] = {1, 2, 3}; }), ErrorCode::Schema);
  EXPECT_EQ(with([](json &m) { m["cameras"][0]["width"] = "eight"; }), ErrorCode::Schema);
  EXPECT_EQ(with([](json &m) { m["cameras"][0]["split"] = "val"; }), ErrorCode::Schema);
  EXPECT_EQ(with([](json &m) { m["version"] = 99; }), ErrorCode::UnsupportedVersion);
  EXPECT_EQ(with([](json &m) { m["frames"] = json::array(); }), ErrorCode::Schema);
  EXPECT_EQ(with([](json &m) { m["frames"][0]["images"][0] = "images/nope.png"; }), ErrorCode::Io);
  write_json(dir / "manifest.json", good);
  spit(dir / "poses.json", "{ not json");
  EXPECT_EQ(code_of([&] { load_dataset(dir); }), ErrorCode::Schema);
  fs::remove(dir / "manifest.json");
  EXPECT_EQ(code_of([&] { load_dataset(dir); }), ErrorCode::Io);
}

TEST(Dataset, ImageSizeMismatchRejected) {
  const fs::path dir = scratch_dir("ds_size");
  save_dataset(minimal_dataset(), dir);
  save_png(dir / dataset_image_name(0, 0), Image(5, 5).view());
  EXPECT_EQ(code_of([&] { load_dataset(dir); }), ErrorCode::Schema);
}

TEST(Template, ToyFileRenormalizes) {
  const fs::path dir = scratch_dir("tmpl");
  spit(dir / "t.json", kToyTemplate);
  const TemplateModel t = load_template(dir / "t.json");
  EXPECT_EQ(t.vertex_count(), 4u);
  EXPECT_FALSE(t.has_uv());
  for (const SkinWeights &w : t.weights)
    EXPECT_NEAR(w.sum(), 1.0, 1e-15);
  EXPECT_EQ(t.weights[1].count, 2);
  EXPECT_EQ(t.weights[0].count, 1);
}

TEST(Template, RejectsCycleAndBadWeights) {
  const fs::path dir = scratch_dir("tmpl_bad");
  json j = json::parse(kToyTemplate);
  j["parents"][0] = 0;
  write_json(dir / "t.json", j);
  EXPECT_EQ(code_of([&] { load_template(dir / "t.json"); }), ErrorCode::InvalidSkeleton);
  j = json::parse(kToyTemplate);
  j["skin_weights"][2] = {0.3, 0.6, 0, 0};
  write_json(dir / "t.json", j);
  EXPECT_EQ(code_of([&] { load_template(dir / "t.json"); }), ErrorCode::InvalidParameter);
  j = json::parse(kToyTemplate);
  j["skin_bones"][3][0] = 5;
  write_json(dir / "t.json", j);
  EXPECT_THROW(load_template(dir / "t.json"), Error);
  j = json::parse(kToyTemplate);
  j["version"] = 2;
  write_json(dir / "t.json", j);
  EXPECT_EQ(code_of([&] { load_template(dir / "t.json"); }), ErrorCode::UnsupportedVersion);
}

TEST(Template, Base64BlocksRoundTrip) {
  const fs::path dir = scratch_dir("tmpl_b64");
  TemplateModel t = generate_synthetic_scene([] {
                      SynthConfig c;
                      c.points = 50;
                      c.template_vertices = 30;
                      c.frames = 1;
                      c.cameras = 1;
                      c.width = c.height = 8;
                      c.uv = true;
                      return c;
                    }())
                        .template_model;
  save_template(t, dir / "t.json");
  const json j = read_json(dir / "t.json");
  EXPECT_TRUE(j["vertices"].contains("base64"));
  const TemplateModel back = load_template(dir / "t.json");
  EXPECT_EQ(back.vertices, t.vertices);
  EXPECT_EQ(back.uv, t.uv);
  EXPECT_EQ(back.skeleton.parent, t.skeleton.parent);
  for (std::size_t i = 0; i < t.vertex_count(); ++i) {
    EXPECT_EQ(back.weights[i].bone, t.weights[i].bone);
    for (int k = 0; k < kMaxInfluences; ++k)
      EXPECT_NEAR(back.weights[i].weight[k], t.weights[i].weight[k], 1e-15);
  }
}

TEST(Template, F32BlocksAndBadBase64) {
  const fs::path dir = scratch_dir("tmpl_f32");
  json j = json::parse(kToyTemplate);
  const float verts[12] = {0, 0, 0, 0, 0.5f, 0, 0, 1, 0, 0, 1.5f, 0};
  const auto *bytes = reinterpret_cast<const std::uint8_t *>(verts);
  j["vertices"] = {{"dtype", "f32le"}, {"shape", {4, 3}}, {"base64", base64_encode({bytes, sizeof(verts)})}};
  write_json(dir / "t.json", j);
  EXPECT_EQ(load_template(dir / "t.json").vertex(3), Vec3(0, 1.5, 0));
  j["vertices"]["base64"] = "@@@@";
  write_json(dir / "t.json", j);
  EXPECT_EQ(code_of([&] { load_template(dir / "t.json"); }), ErrorCode::Schema);
  j["vertices"] = {{"dtype", "f32le"}, {"shape", {3, 3}}, {"base64", base64_encode({bytes, sizeof(verts)})}};
  write_json(dir / "t.json", j);
  EXPECT_THROW(load_template(dir / "t.json"), Error);
}

TEST(Base64, KnownVectors) {
  const std::string s = "foobar";
  const std::vector<std::uint8_t> b(s.begin(), s.end());
  EXPECT_EQ(base64_encode({b.data(), 0}), "");
  EXPECT_EQ(base64_encode({b.data(), 1}), "Zg==");
  EXPECT_EQ(base64_encode({b.data(), 2}), "Zm8=");
  EXPECT_EQ(base64_encode({b.data(), 6}), "Zm9vYmFy");
  EXPECT_EQ(base64_decode("Zm9vYmE="), std::vector<std::uint8_t>(b.begin(), b.begin() + 5));
  EXPECT_THROW(base64_decode("Zm9"), Error);
}

namespace {

Checkpoint trained_checkpoint() {
  SynthConfig sc;
  sc.points = 200;
  sc.template_vertices = 30;
  sc.cameras = 2;
  sc.frames = 2;
  sc.width = sc.height = 24;
  sc.focal = 45;
  static const SynthScene scene = generate_synthetic_scene(sc);
  InitConfig ic;
  ic.upsample_k = 1;
  ic.radius = 0.03;
  ic.fields = small_fields();
  TrainConfig tc;
  tc.epochs = 2;
  tc.ao_start_epoch = 2;
  Trainer tr(scene.dataset, init_from_skinned_model(scene.template_model, ic), tc);
  tr.run();
  Checkpoint ck;
  ck.model = tr.model();
  ck.train = tr.state();
  ck.config_json = R"({"train":{"epochs":2}})";
  ck.seed = 42;
  return ck;
}

void expect_same_model(SkinnedGaussianModel a, SkinnedGaussianModel b) {
  const auto pa = parameter_blocks(a), pb = parameter_blocks(b);
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t k = 0; k < pa.size(); ++k) {
    EXPECT_EQ(pa[k].name, pb[k].name);
    EXPECT_TRUE(std::equal(pa[k].values.begin(), pa[k].values.end(), pb[k].values.begin(), pb[k].values.end()))
        << pa[k].name;
  }
  EXPECT_EQ(a.skeleton.parent, b.skeleton.parent);
  EXPECT_EQ(a.ao_active, b.ao_active);
  EXPECT_EQ(a.sh_mode, b.sh_mode);
  EXPECT_EQ(a.uv, b.uv);
  ASSERT_EQ(a.skin.size(), b.skin.size());
  for (std::size_t i = 0; i < a.skin.size(); ++i) {
    EXPECT_EQ(a.skin[i].bone, b.skin[i].bone);
    EXPECT_EQ(a.skin[i].weight, b.skin[i].weight);
  }
  EXPECT_EQ(a.fields.bounds.min, b.fields.bounds.min);
  EXPECT_EQ(a.fields.bounds.max, b.fields.bounds.max);
}

} // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const fs::path dir = scratch_dir("ckpt");
  const Checkpoint ck = trained_checkpoint();
  save_checkpoint(ck, dir / "a.ckpt");
  const Checkpoint back = load_checkpoint(dir / "a.ckpt");
  expect_same_model(ck.model, back.model);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(json::parse(back.config_json), json::parse(ck.config_json));
  ASSERT_TRUE(back.train);
  EXPECT_EQ(back.train->epoch, ck.train->epoch);
  EXPECT_EQ(back.train->step, ck.train->step);
  const auto &ma = ck.train->adam.moments(), &mb = back.train->adam.moments();
  ASSERT_EQ(ma.size(), mb.size());
  for (std::size_t k = 0; k < ma.size(); ++k) {
    EXPECT_EQ(ma[k].name, mb[k].name);
    EXPECT_EQ(ma[k].step, mb[k].step);
    EXPECT_EQ(ma[k].m, mb[k].m) << ma[k].name;
    EXPECT_EQ(ma[k].v, mb[k].v) << ma[k].name;
  }
  // Saving again gives the same bytes.
  save_checkpoint(back, dir / "b.ckpt");
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
}

TEST(Checkpoint, RenderAfterLoadIsPixelExact) {
  const fs::path dir = scratch_dir("ckpt_render");
  const Checkpoint ck = trained_checkpoint();
  save_checkpoint(ck, dir / "a.ckpt");
  const Checkpoint back = load_checkpoint(dir / "a.ckpt");
  const Pose pose = random_pose(ck.model.skeleton.bone_count(), 3, 0.3, 0.4);
  const Camera cam = test_camera(40, 40, 50);
  const AvatarInstance a{&ck.model, pose, true}, b{&back.model, pose, true};
  EXPECT_EQ(render_avatars(std::span(&a, 1), cam, Vec3::Zero()).color,
            render_avatars(std::span(&b, 1), cam, Vec3::Zero()).color);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const fs::path dir = scratch_dir("ckpt_bad");
  Checkpoint ck;
  ck.model = random_model(20, 2, 1);
  save_checkpoint(ck, dir / "a.ckpt");
  const std::string bytes = slurp(dir / "a.ckpt");
  EXPECT_FALSE(load_checkpoint(dir / "a.ckpt").train);

  spit(dir / "t.ckpt", bytes.substr(0, bytes.size() / 2));
  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "t.ckpt"); }), ErrorCode::Corrupt);
  spit(dir / "t.ckpt", bytes.substr(0, 10));
  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "t.ckpt"); }), ErrorCode::Corrupt);
  std::string flipped = bytes;
  flipped[flipped.size() - 100] ^= 0x10;
  spit(dir / "t.ckpt", flipped);
  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "t.ckpt"); }), ErrorCode::Corrupt);
  std::string magic = bytes;
  magic[0] = 'X';
  spit(dir / "t.ckpt", magic);
  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "t.ckpt"); }), ErrorCode::Corrupt);
  std::string version = bytes;
  version[8] = 7;
  spit(dir / "t.ckpt", version);
  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "t.ckpt"); }), ErrorCode::UnsupportedVersion);
  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "missing.ckpt"); }), ErrorCode::Io);
}

TEST(Checkpoint, UvModelRoundTrip) {
  const fs::path dir = scratch_dir("ckpt_uv");
  Checkpoint ck;
  FieldBankConfig fc = small_fields();
  fc.atlas_width = 3;
  fc.atlas_height = 2;
  ck.model = random_model(10, 3, 2, 0.4, fc);
  ASSERT_TRUE(ck.model.fields.atlas);
  ck.model.sh_mode = ShMode::Uv;
  for (std::size_t i = 0; i < ck.model.size(); ++i)
    ck.model.uv.insert(ck.model.uv.end(), {0.1 * double(i % 10), 0.5});
  ck.model.fields.atlas->params()[7] = 0.25;
  save_checkpoint(ck, dir / "a.ckpt");
  expect_same_model(ck.model, load_checkpoint(dir / "a.ckpt").model);
}

TEST(Ply, HeaderAndRecords) {
  const fs::path dir = scratch_dir("ply");
  const SkinnedGaussianModel m = random_model(17, 2, 3);
  export_ply(m, std::nullopt, dir / "a.ply");
  std::ifstream in(dir / "a.ply");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line) && line != "end_header")
    header.push_back(line);
  ASSERT_GE(header.size(), 3u);
  EXPECT_EQ(header[0], "ply");
  EXPECT_EQ(header[1], "format ascii 1.0");
  EXPECT_NE(std::find(header.begin(), header.end(), "element vertex 17"), header.end());
  for (const char *p : {"property float x", "property uchar red", "property float opacity"})
    EXPECT_NE(std::find(header.begin(), header.end(), std::string(p)), header.end()) << p;
  int records = 0;
  while (std::getline(in, line))
    if (!line.empty()) {
      std::istringstream ss(line);
      double x, y, z, o;
      int r, g, b;
      ASSERT_TRUE(ss >> x >> y >> z >> r >> g >> b >> o) << line;
      EXPECT_GE(r, 0);
      EXPECT_LE(r, 255);
      ++records;
    }
  EXPECT_EQ(records, 17);
}

TEST(Ply, IdentityPoseEqualsCanonical) {
  const fs::path dir = scratch_dir("ply_pose");
  const SkinnedGaussianModel m = random_model(9, 2, 4);
  auto body = [&](const fs::path &p) {
    const std::string s = slurp(p);
    return s.substr(s.find("end_header"));
  };
  export_ply(m, std::nullopt, dir / "a.ply");
  export_ply(m, Pose::identity(2), dir / "b.ply");
  EXPECT_EQ(body(dir / "a.ply"), body(dir / "b.ply"));
  export_ply(m, random_pose(2, 1, 0.8), dir / "c.ply");
  EXPECT_NE(body(dir / "a.ply"), body(dir / "c.ply"));
}

TEST(Synth, FixedSeedIsByteIdentical) {
  SynthConfig c;
  c.points = 150;
  c.template_vertices = 20;
  c.cameras = 2;
  c.frames = 2;
  c.width = c.height = 16;
  c.seed = 7;
  const fs::path a = scratch_dir("synth_a"), b = scratch_dir("synth_b");
  generate_synthetic_dataset(c, a);
  generate_synthetic_dataset(c, b);
  std::vector<std::string> files;
  for (const auto &e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file())
      files.push_back(fs::relative(e.path(), a).string());
  EXPECT_GE(files.size(), 8u);
  for (const std::string &f : files)
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const Dataset ds = load_dataset(a);
  EXPECT_EQ(ds.cameras.size(), 3u);
  EXPECT_EQ(ds.cameras_in_split("test").size(), 1u);
  const Checkpoint gt = load_checkpoint(a / ground_truth_name(0));
  const SkinnedGaussianModel *m = &gt.model;
  for (const ViewMetrics &v : evaluate(ds, std::span(&m, 1), "all"))
    EXPECT_EQ(v.psnr, kPsnrCap);
}

TEST(Synth, AoPatternChangesImagesAtSamePose) {
  SynthConfig c;
  c.points = 200;
  c.template_vertices = 20;
  c.cameras = 1;
  c.test_cameras = 0;
  c.frames = 5;
  c.width = c.height = 24;
  c.ao_dimming = 0.3;
  const SynthScene s = generate_synthetic_scene(c);
  const SkinnedGaussianModel &gt = s.ground_truth[0].model;
  Pose p0 = Pose::identity(c.bones, 0.0), p1 = Pose::identity(c.bones, 0.25);
  const Camera &cam = s.dataset.cameras[0].camera;
  const AvatarInstance a{&gt, p0, true}, b{&gt, p1, true};
  const FrameBuffers fa = render_avatars(std::span(&a, 1), cam, Vec3::Zero());
  const FrameBuffers fb = render_avatars(std::span(&b, 1), cam, Vec3::Zero());
  double diff = 0;
  for (std::size_t i = 0; i < fa.color.size(); ++i)
    diff = std::max(diff, std::abs(fa.color[i] - fb.color[i]));
  EXPECT_GT(diff, 0.01);
}

TEST(Synth, InvalidConfigNamesKey) {
  SynthConfig c;
  c.bones = 0;
  const std::string msg = message_of([&] { c.validate(); });
  EXPECT_NE(msg.find("synth.bones"), std::string::npos) << msg;
}

TEST(Settings, ParsesSectionsCommentsAndQuotes) {
  const KeyValues kv = parse_config_text("# top\n"
                                         "train.epochs = 3\n"
                                         "[synth]\n"
                                         "  bones = 4   # trailing\n"
                                         "background = \"0.1, 0.2 0.3\"\n"
                                         "\n"
                                         "[ lr ]\n"
                                         "centers=1e-3\n");
  ASSERT_EQ(kv.size(), 4u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"train.epochs", "3"}));
  EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"synth.bones", "4"}));
  EXPECT_EQ(kv[2].second, "0.1, 0.2 0.3");
  EXPECT_EQ(kv[3].first, "lr.centers");
  Settings s;
  apply_settings(s, kv);
  EXPECT_EQ(s.train.epochs, 3);
  EXPECT_EQ(s.synth.bones, 4);
  EXPECT_EQ(s.synth.background, Vec3(0.1, 0.2, 0.3));
  EXPECT_EQ(s.train.lr.centers, 1e-3);
}

TEST(Settings, LaterValuesWin) {
  Settings s;
  apply_settings(s, parse_config_text("train.epochs = 3\n"));
  apply_setting(s, "train.epochs", "9");
  EXPECT_EQ(s.train.epochs, 9);
}

TEST(Settings, UnknownKeyAndBadValueNameTheKey) {
  Settings s;
  EXPECT_EQ(code_of([&] { apply_setting(s, "train.epoch", "3"); }), ErrorCode::Configuration);
  EXPECT_NE(message_of([&] { apply_setting(s, "train.epoch", "3"); }).find("train.epoch"), std::string::npos);
  const std::string msg = message_of([&] { apply_setting(s, "synth.points", "many"); });
  EXPECT_NE(msg.find("synth.points"), std::string::npos) << msg;
  EXPECT_EQ(code_of([&] { apply_setting(s, "train.use_ao", "maybe"); }), ErrorCode::Configuration);
  EXPECT_EQ(code_of([&] { apply_setting(s, "init.sh_mode", "rgb"); }), ErrorCode::Configuration);
  EXPECT_EQ(code_of([&] { parse_config_text("[train\n"); }), ErrorCode::Configuration);
  EXPECT_EQ(code_of([&] { parse_config_text("epochs\n"); }), ErrorCode::Configuration);
}

TEST(Settings, CatalogKeysAreAllSettableAndEchoed) {
  Settings s;
  const json echo = json::parse(settings_to_json(s));
  for (const SettingInfo &i : setting_catalog()) {
    EXPECT_FALSE(i.help.empty()) << i.key;
    EXPECT_TRUE(echo.contains(i.key)) << i.key;
  }
}
