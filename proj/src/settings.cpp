#include "avsplat/settings.hpp"

#include "json_util.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace avsplat {

using detail::json;

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string &key, const std::string &value, const char *what) {
  throw Error(ErrorCode::Configuration, "setting '" + key + "': cannot parse '" + value + "' as " + what);
}

template <class T> T parse_integer(const std::string &key, const std::string &v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    bad_value(key, v, "an integer");
  return out;
}

double parse_double(const std::string &key, const std::string &v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d))
      bad_value(key, v, "a number");
    return d;
  } catch (const std::logic_error &) {
    bad_value(key, v, "a number");
  }
}

bool parse_bool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on")
    return true;
  if (v == "false" || v == "0" || v == "no" || v == "off")
    return false;
  bad_value(key, v, "a boolean");
}

Vec3 parse_vec3(const std::string &key, const std::string &v) {
  std::string s = v;
  for (char &c : s)
    if (c == '[' || c == ']' || c == ',')
      c = ' ';
  std::istringstream in(s);
  Vec3 out;
  std::string a, b, c, extra;
  if (!(in >> a >> b >> c) || (in >> extra))
    bad_value(key, v, "three numbers");
  out << parse_double(key, a), parse_double(key, b), parse_double(key, c);
  return out;
}

struct Entry {
  std::string key, help;
  std::function<void(Settings &, const std::string &key, const std::string &value)> set;
  std::function<json(const Settings &)> get;
};

#define AVS_INT(KEY, FIELD, HELP)                                                                                     \
  Entry {                                                                                                              \
    KEY, HELP, [](Settings &s, const std::string &k, const std::string &v) { s.FIELD = parse_integer<int>(k, v); },   \
        [](const Settings &s) { return json(s.FIELD); }                                                                \
  }
#define AVS_U64(KEY, FIELD, HELP)                                                                                     \
  Entry {                                                                                                              \
    KEY, HELP,                                                                                                         \
        [](Settings &s, const std::string &k, const std::string &v) { s.FIELD = parse_integer<std::uint64_t>(k, v); }, \
        [](const Settings &s) { return json(s.FIELD); }                                                                \
  }
#define AVS_DBL(KEY, FIELD, HELP)                                                                                     \
  Entry {                                                                                                              \
    KEY, HELP, [](Settings &s, const std::string &k, const std::string &v) { s.FIELD = parse_double(k, v); },         \
        [](const Settings &s) { return json(s.FIELD); }                                                                \
  }
#define AVS_BOOL(KEY, FIELD, HELP)                                                                                    \
  Entry {                                                                                                              \
    KEY, HELP, [](Settings &s, const std::string &k, const std::string &v) { s.FIELD = parse_bool(k, v); },           \
        [](const Settings &s) { return json(s.FIELD); }                                                                \
  }

// Grid shape keys apply to all three field grids; table sizes are per grid.
void set_all_grids(Settings &s, const std::function<void(HashGridConfig &)> &fn) {
  fn(s.init.fields.sh_grid);
  fn(s.init.fields.displacement_grid);
  fn(s.init.fields.ao_grid);
}

const std::vector<Entry> &entries() {
  static const std::vector<Entry> e = {
      AVS_INT("train.epochs", train.epochs, "number of training epochs"),
      AVS_INT("train.ao_start_epoch", train.ao_start_epoch, "1-based epoch at which the AO field starts training"),
      AVS_BOOL("train.use_ao", train.use_ao, "train and render with the AO field"),
      AVS_U64("train.seed", train.seed, "seed for shuffling and initialization"),
      AVS_INT("train.threads", train.threads, "worker threads for rendering"),
      AVS_DBL("train.lambda", train.loss.lambda, "D-SSIM weight in the loss"),
      AVS_INT("train.ssim_window", train.loss.ssim_window, "SSIM Gaussian window size (odd)"),
      AVS_DBL("train.ssim_sigma", train.loss.ssim_sigma, "SSIM Gaussian window sigma"),
      AVS_DBL("lr.centers", train.lr.centers, "learning rate of Gaussian centers"),
      AVS_DBL("lr.rotations", train.lr.rotations, "learning rate of quaternions"),
      AVS_DBL("lr.scales", train.lr.scales, "learning rate of log-scales"),
      AVS_DBL("lr.opacity", train.lr.opacity, "learning rate of opacity logits"),
      AVS_DBL("lr.joints", train.lr.joints, "learning rate of skeleton joints"),
      AVS_DBL("lr.hash", train.lr.hash, "learning rate of hash tables"),
      AVS_DBL("lr.mlp", train.lr.mlp, "learning rate of MLP weights"),
      AVS_DBL("lr.atlas", train.lr.atlas, "learning rate of the UV atlas"),
      AVS_DBL("adam.beta1", train.adam.beta1, "Adam first-moment decay"),
      AVS_DBL("adam.beta2", train.adam.beta2, "Adam second-moment decay"),
      AVS_DBL("adam.epsilon", train.adam.epsilon, "Adam epsilon"),
      AVS_INT("raster.tile_size", train.raster.tile_size, "rasterizer tile size in pixels"),
      AVS_INT("init.k", init.upsample_k, "extra points sampled per template vertex"),
      AVS_DBL("init.radius", init.radius, "sampling ball radius around template vertices (m)"),
      AVS_DBL("init.opacity", init.initial_opacity, "initial opacity"),
      AVS_DBL("init.margin", init.bounds_margin, "field bounding box padding (m)"),
      Entry{"init.sh_mode", "color source: hash or uv",
            [](Settings &s, const std::string &, const std::string &v) { s.init.sh_mode = parse_sh_mode(v); },
            [](const Settings &s) { return json(to_string(s.init.sh_mode)); }},
      Entry{"fields.levels", "hash grid levels (all grids)",
            [](Settings &s, const std::string &k, const std::string &v) {
              const int n = parse_integer<int>(k, v);
              set_all_grids(s, [n](HashGridConfig &g) { g.levels = n; });
            },
            [](const Settings &s) { return json(s.init.fields.sh_grid.levels); }},
      Entry{"fields.features", "features per hash level (all grids)",
            [](Settings &s, const std::string &k, const std::string &v) {
              const int n = parse_integer<int>(k, v);
              set_all_grids(s, [n](HashGridConfig &g) { g.features = n; });
            },
            [](const Settings &s) { return json(s.init.fields.sh_grid.features); }},
      Entry{"fields.base_resolution", "coarsest grid resolution (all grids)",
            [](Settings &s, const std::string &k, const std::string &v) {
              const int n = parse_integer<int>(k, v);
              set_all_grids(s, [n](HashGridConfig &g) { g.base_resolution = n; });
            },
            [](const Settings &s) { return json(s.init.fields.sh_grid.base_resolution); }},
      Entry{"fields.finest_resolution", "finest grid resolution (all grids)",
            [](Settings &s, const std::string &k, const std::string &v) {
              const int n = parse_integer<int>(k, v);
              set_all_grids(s, [n](HashGridConfig &g) { g.finest_resolution = n; });
            },
            [](const Settings &s) { return json(s.init.fields.sh_grid.finest_resolution); }},
      AVS_INT("fields.sh_log2_table", init.fields.sh_grid.log2_table_size, "log2 hash table size of the SH field"),
      AVS_INT("fields.displacement_log2_table", init.fields.displacement_grid.log2_table_size,
              "log2 hash table size of the displacement field"),
      AVS_INT("fields.ao_log2_table", init.fields.ao_grid.log2_table_size, "log2 hash table size of the AO field"),
      AVS_INT("fields.hidden_width", init.fields.hidden_width, "MLP hidden width"),
      AVS_INT("fields.hidden_layers", init.fields.hidden_layers, "MLP hidden layer count"),
      AVS_INT("fields.time_frequencies", init.fields.time_frequencies, "time encoding frequencies"),
      AVS_DBL("fields.max_displacement", init.fields.max_displacement, "bound on the displacement field (m)"),
      AVS_DBL("fields.ao_bias", init.fields.ao_bias, "initial AO output logit"),
      Entry{"fields.atlas_size", "UV atlas width and height in texels (uv mode)",
            [](Settings &s, const std::string &k, const std::string &v) {
              s.init.fields.atlas_width = s.init.fields.atlas_height = parse_integer<int>(k, v);
            },
            [](const Settings &s) { return json(s.init.fields.atlas_width); }},
      AVS_INT("synth.bones", synth.bones, "bones in the synthetic chain"),
      AVS_INT("synth.points", synth.points, "ground-truth Gaussians per avatar"),
      AVS_INT("synth.template_vertices", synth.template_vertices, "template vertex count"),
      AVS_INT("synth.cameras", synth.cameras, "training ring cameras"),
      AVS_INT("synth.test_cameras", synth.test_cameras, "held-out cameras"),
      AVS_INT("synth.frames", synth.frames, "frames"),
      AVS_INT("synth.width", synth.width, "image width"),
      AVS_INT("synth.height", synth.height, "image height"),
      AVS_DBL("synth.focal", synth.focal, "focal length in pixels"),
      AVS_DBL("synth.camera_distance", synth.camera_distance, "ring radius (m)"),
      AVS_DBL("synth.bone_length", synth.bone_length, "bone length (m)"),
      AVS_DBL("synth.limb_radius", synth.limb_radius, "capsule radius (m)"),
      AVS_DBL("synth.motion_amplitude", synth.motion_amplitude, "pose amplitude (rad)"),
      AVS_DBL("synth.ao_dimming", synth.ao_dimming, "relative amplitude of the global AO pulse (0 = none)"),
      AVS_DBL("synth.ao_mean", synth.ao_mean, "mean AO of the pulse"),
      AVS_DBL("synth.template_noise", synth.template_noise, "template vertex noise sigma (m)"),
      AVS_BOOL("synth.uv", synth.uv, "give the template UV coordinates"),
      AVS_INT("synth.avatars", synth.avatars, "avatar count"),
      AVS_DBL("synth.avatar_spacing", synth.avatar_spacing, "x offset between avatars (m)"),
      Entry{"synth.background", "background color r,g b (linear)",
            [](Settings &s, const std::string &k, const std::string &v) { s.synth.background = parse_vec3(k, v); },
            [](const Settings &s) { return detail::to_json(s.synth.background); }},
      AVS_U64("synth.seed", synth.seed, "generator seed"),
  };
  return e;
}

#undef AVS_INT
#undef AVS_U64
#undef AVS_DBL
#undef AVS_BOOL

} // namespace

KeyValues parse_config_text(const std::string &text, const std::string &source) {
  KeyValues out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"')
        quoted = !quoted;
      else if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty())
      continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error(ErrorCode::Configuration, where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Configuration, where + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty())
      throw Error(ErrorCode::Configuration, where + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    out.emplace_back(section.empty() ? key : section + "." + key, value);
  }
  return out;
}

KeyValues load_config_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.filename().string());
}

void apply_setting(Settings &s, const std::string &key, const std::string &value) {
  for (const Entry &e : entries())
    if (e.key == key) {
      e.set(s, key, value);
      return;
    }
  throw Error(ErrorCode::Configuration, "unknown setting '" + key + "'");
}

void apply_settings(Settings &s, const KeyValues &kv) {
  for (const auto &[k, v] : kv)
    apply_setting(s, k, v);
}

const std::vector<SettingInfo> &setting_catalog() {
  static const std::vector<SettingInfo> cat = [] {
    std::vector<SettingInfo> c;
    for (const Entry &e : entries())
      c.push_back({e.key, e.help});
    return c;
  }();
  return cat;
}

std::string settings_to_json(const Settings &s) {
  json j = json::object();
  for (const Entry &e : entries())
    j[e.key] = e.get(s);
  return j.dump();
}

} // namespace avsplat
