#include "avsplat/dataset.hpp"

#include "avsplat/image_io.hpp"
#include "json_util.hpp"

#include <charconv>

namespace avsplat {

using detail::json;

namespace {

Camera parse_camera(const json &j, const std::string &where) {
  Camera c;
  const std::vector<double> r = detail::get_numbers(detail::require(j, "rotation", where), where + ".rotation", 9);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      c.rotation(a, b) = r[3 * a + b];
  c.translation = detail::get_vec3(detail::require(j, "translation", where), where + ".translation");
  c.fx = detail::get_number(detail::require(j, "fx", where), where + ".fx");
  c.fy = detail::get_number(detail::require(j, "fy", where), where + ".fy");
  c.cx = detail::get_number(detail::require(j, "cx", where), where + ".cx");
  c.cy = detail::get_number(detail::require(j, "cy", where), where + ".cy");
  c.width = static_cast<int>(detail::get_integer(detail::require(j, "width", where), where + ".width"));
  c.height = static_cast<int>(detail::get_integer(detail::require(j, "height", where), where + ".height"));
  if (j.contains("z_near"))
    c.z_near = detail::get_number(j["z_near"], where + ".z_near");
  try {
    c.validate();
  } catch (const Error &e) {
    detail::schema_error(where, e.what());
  }
  return c;
}

json camera_json(const DatasetCamera &dc) {
  const Camera &c = dc.camera;
  json rot = json::array();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      rot.push_back(c.rotation(a, b));
  return json{{"id", dc.id},       {"split", dc.split},   {"width", c.width}, {"height", c.height},
              {"fx", c.fx},        {"fy", c.fy},          {"cx", c.cx},       {"cy", c.cy},
              {"rotation", rot},   {"translation", detail::to_json(c.translation)}, {"z_near", c.z_near}};
}

Pose parse_pose(const json &j, int bone_count, const std::string &where) {
  Pose p;
  const json &e = detail::get_array(detail::require(j, "euler", where), where + ".euler");
  if (bone_count >= 0 && static_cast<int>(e.size()) != bone_count)
    detail::schema_error(where + ".euler", "expected " + std::to_string(bone_count) + " joint rotations, found " +
                                               std::to_string(e.size()));
  for (std::size_t b = 0; b < e.size(); ++b)
    p.euler.push_back(detail::get_vec3(e[b], where + ".euler[" + std::to_string(b) + "]"));
  if (j.contains("translation"))
    p.translation = detail::get_vec3(j["translation"], where + ".translation");
  return p;
}

json pose_json(const Pose &p) {
  json e = json::array();
  for (const Vec3 &v : p.euler)
    e.push_back(detail::to_json(v));
  return json{{"euler", e}, {"translation", detail::to_json(p.translation)}};
}

} // namespace

int Dataset::find_camera(const std::string &key) const {
  for (std::size_t i = 0; i < cameras.size(); ++i)
    if (cameras[i].id == key)
      return static_cast<int>(i);
  int idx = -1;
  auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
  if (ec == std::errc() && ptr == key.data() + key.size() && idx >= 0 && idx < static_cast<int>(cameras.size()))
    return idx;
  return -1;
}

std::vector<int> Dataset::cameras_in_split(const std::string &split) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < cameras.size(); ++i)
    if (split == "all" || cameras[i].split == split)
      out.push_back(static_cast<int>(i));
  return out;
}

std::string dataset_image_name(int camera, int frame) {
  return "images/cam" + std::to_string(camera) + "_frame" + std::to_string(frame) + ".png";
}

std::vector<double> normalize_timestamps(const std::vector<double> &ts) {
  std::vector<double> out(ts.size(), 0.0);
  if (ts.size() < 2)
    return out;
  const double span = ts.back() - ts.front();
  for (std::size_t i = 0; i < ts.size(); ++i)
    out[i] = (ts[i] - ts.front()) / span;
  out.back() = 1.0;
  return out;
}

std::vector<std::vector<Pose>> load_pose_file(const std::filesystem::path &path) {
  const std::string file = path.filename().string();
  const json root = detail::read_json_file(path);
  const int nb = static_cast<int>(detail::get_integer(detail::require(root, "bone_count", file), file + ".bone_count"));
  if (nb < 1)
    detail::schema_error(file + ".bone_count", "must be >= 1");
  const json &frames = detail::get_array(detail::require(root, "frames", file), file + ".frames");
  std::vector<std::vector<Pose>> out;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::string where = file + ".frames[" + std::to_string(f) + "]";
    const json &av = detail::get_array(detail::require(frames[f], "avatars", where), where + ".avatars");
    std::vector<Pose> poses;
    for (std::size_t a = 0; a < av.size(); ++a)
      poses.push_back(parse_pose(av[a], nb, where + ".avatars[" + std::to_string(a) + "]"));
    if (frames[f].contains("time")) {
      const double t = detail::get_number(frames[f]["time"], where + ".time");
      for (Pose &p : poses)
        p.time = t;
    }
    out.push_back(std::move(poses));
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path &dir, bool load_images) {
  Dataset ds;
  ds.root = dir;
  const json m = detail::read_json_file(dir / "manifest.json");
  const std::string mf = "manifest.json";
  const long long version = detail::get_integer(detail::require(m, "version", mf), mf + ".version");
  if (version != kDatasetVersion)
    throw Error(ErrorCode::UnsupportedVersion, mf + ": dataset version " + std::to_string(version) + " (expected " +
                                                   std::to_string(kDatasetVersion) + ")");
  ds.avatar_count = static_cast<int>(detail::get_integer(detail::require(m, "avatar_count", mf), mf + ".avatar_count"));
  if (ds.avatar_count < 1)
    detail::schema_error(mf + ".avatar_count", "must be >= 1");
  if (m.contains("background"))
    ds.background = detail::get_vec3(m["background"], mf + ".background");

  const json &cams = detail::get_array(detail::require(m, "cameras", mf), mf + ".cameras");
  if (cams.empty())
    detail::schema_error(mf + ".cameras", "at least one camera is required");
  for (std::size_t c = 0; c < cams.size(); ++c) {
    const std::string where = mf + ".cameras[" + std::to_string(c) + "]";
    DatasetCamera dc;
    dc.id = detail::get_string(detail::require(cams[c], "id", where), where + ".id");
    if (cams[c].contains("split"))
      dc.split = detail::get_string(cams[c]["split"], where + ".split");
    if (dc.split != "train" && dc.split != "test")
      detail::schema_error(where + ".split", "must be 'train' or 'test'");
    dc.camera = parse_camera(cams[c], where);
    for (const DatasetCamera &o : ds.cameras)
      if (o.id == dc.id)
        detail::schema_error(where + ".id", "duplicate camera id '" + dc.id + "'");
    ds.cameras.push_back(std::move(dc));
  }

  const json &frames = detail::get_array(detail::require(m, "frames", mf), mf + ".frames");
  if (frames.empty())
    detail::schema_error(mf + ".frames", "at least one frame is required");
  std::vector<double> stamps;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::string where = mf + ".frames[" + std::to_string(f) + "]";
    DatasetFrame fr;
    fr.timestamp = detail::get_number(detail::require(frames[f], "timestamp", where), where + ".timestamp");
    if (!stamps.empty() && !(fr.timestamp > stamps.back()))
      detail::schema_error(where + ".timestamp", "timestamps must be strictly increasing (" +
                                                     std::to_string(stamps.back()) + " then " +
                                                     std::to_string(fr.timestamp) + ")");
    stamps.push_back(fr.timestamp);
    const json &imgs = detail::get_array(detail::require(frames[f], "images", where), where + ".images", cams.size());
    for (std::size_t c = 0; c < imgs.size(); ++c) {
      const std::string rel = detail::get_string(imgs[c], where + ".images[" + std::to_string(c) + "]");
      if (!std::filesystem::exists(dir / rel))
        throw Error(ErrorCode::Io, where + ".images[" + std::to_string(c) + "]: missing file " + rel);
      fr.images.push_back(rel);
    }
    ds.frames.push_back(std::move(fr));
  }

  const std::string pf = detail::get_string(detail::require(m, "poses", mf), mf + ".poses");
  const json pj = detail::read_json_file(dir / pf);
  ds.bone_count = static_cast<int>(detail::get_integer(detail::require(pj, "bone_count", pf), pf + ".bone_count"));
  if (ds.bone_count < 1)
    detail::schema_error(pf + ".bone_count", "must be >= 1");
  const json &pframes = detail::get_array(detail::require(pj, "frames", pf), pf + ".frames", frames.size());
  const std::vector<double> t = normalize_timestamps(stamps);
  for (std::size_t f = 0; f < pframes.size(); ++f) {
    const std::string where = pf + ".frames[" + std::to_string(f) + "]";
    const json &av = detail::get_array(detail::require(pframes[f], "avatars", where), where + ".avatars");
    for (int a = 0; a < ds.avatar_count; ++a) {
      if (a >= static_cast<int>(av.size()))
        detail::schema_error(where, "frame " + std::to_string(f) + " is missing a pose for avatar " + std::to_string(a));
      Pose p = parse_pose(av[a], ds.bone_count, where + ".avatars[" + std::to_string(a) + "]");
      p.time = t[f];
      ds.frames[f].poses.push_back(std::move(p));
    }
    if (static_cast<int>(av.size()) > ds.avatar_count)
      detail::schema_error(where, "frame " + std::to_string(f) + " has more poses than avatar_count");
  }

  if (load_images) {
    ds.images.resize(ds.frames.size());
    for (std::size_t f = 0; f < ds.frames.size(); ++f)
      for (std::size_t c = 0; c < ds.cameras.size(); ++c) {
        Image img = load_png(dir / ds.frames[f].images[c]);
        const Camera &cam = ds.cameras[c].camera;
        if (img.width != cam.width || img.height != cam.height)
          throw Error(ErrorCode::Schema, ds.frames[f].images[c] + ": image is " + std::to_string(img.width) + "x" +
                                             std::to_string(img.height) + ", camera " + ds.cameras[c].id +
                                             " expects " + std::to_string(cam.width) + "x" +
                                             std::to_string(cam.height));
        ds.images[f].push_back(std::move(img));
      }
  }
  return ds;
}

void save_dataset(const Dataset &ds, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir / "images");
  json m;
  m["format"] = "avsplat-dataset";
  m["version"] = kDatasetVersion;
  m["avatar_count"] = ds.avatar_count;
  m["background"] = detail::to_json(ds.background);
  m["poses"] = "poses.json";
  m["cameras"] = json::array();
  for (const DatasetCamera &c : ds.cameras)
    m["cameras"].push_back(camera_json(c));
  m["frames"] = json::array();
  json p;
  p["bone_count"] = ds.bone_count;
  p["frames"] = json::array();
  for (std::size_t f = 0; f < ds.frames.size(); ++f) {
    const DatasetFrame &fr = ds.frames[f];
    std::vector<std::string> names = fr.images;
    if (names.empty())
      for (std::size_t c = 0; c < ds.cameras.size(); ++c)
        names.push_back(dataset_image_name(static_cast<int>(c), static_cast<int>(f)));
    m["frames"].push_back(json{{"timestamp", fr.timestamp}, {"images", names}});
    json av = json::array();
    for (const Pose &pose : fr.poses)
      av.push_back(pose_json(pose));
    p["frames"].push_back(json{{"avatars", av}});
    if (f < ds.images.size())
      for (std::size_t c = 0; c < ds.images[f].size(); ++c)
        save_png(dir / names[c], ds.images[f][c].view());
  }
  detail::write_text_file(dir / "manifest.json", m.dump(2) + "\n");
  detail::write_text_file(dir / "poses.json", p.dump(2) + "\n");
}

} // namespace avsplat
