#include "avsplat/checkpoint.hpp"

#include "json_util.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace avsplat {

using detail::json;

namespace {

constexpr char kMagic[8] = {'A', 'V', 'S', 'P', 'L', 'A', 'T', 'K'};

struct Section {
  std::string name;
  std::vector<double> owned;
  std::span<const double> data;
};

json grid_json(const HashGridConfig &g) {
  return json{{"levels", g.levels},
              {"features", g.features},
              {"base_resolution", g.base_resolution},
              {"finest_resolution", g.finest_resolution},
              {"log2_table_size", g.log2_table_size}};
}

HashGridConfig grid_from_json(const json &j, const std::string &w) {
  HashGridConfig g;
  g.levels = static_cast<int>(detail::get_integer(detail::require(j, "levels", w), w + ".levels"));
  g.features = static_cast<int>(detail::get_integer(detail::require(j, "features", w), w + ".features"));
  g.base_resolution =
      static_cast<int>(detail::get_integer(detail::require(j, "base_resolution", w), w + ".base_resolution"));
  g.finest_resolution =
      static_cast<int>(detail::get_integer(detail::require(j, "finest_resolution", w), w + ".finest_resolution"));
  g.log2_table_size =
      static_cast<int>(detail::get_integer(detail::require(j, "log2_table_size", w), w + ".log2_table_size"));
  return g;
}

void append_u32(std::string &out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t read_u32(const std::string &s, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, s.data() + at, 4);
  return v;
}

bool is_row_block(const std::string &name) { return name.ends_with(".table") || name == "atlas"; }

} // namespace

void save_checkpoint(const Checkpoint &ck, const std::filesystem::path &path) {
  SkinnedGaussianModel &m = const_cast<SkinnedGaussianModel &>(ck.model);
  m.validate();
  const std::size_t n = m.size();
  const FieldBankConfig &fc = m.fields.config();

  json h;
  h["format"] = "avsplat-checkpoint";
  h["point_count"] = n;
  h["parents"] = m.skeleton.parent;
  h["sh_mode"] = to_string(m.sh_mode);
  h["ao_active"] = m.ao_active;
  h["has_uv"] = m.has_uv();
  h["fields"] = json{{"sh_grid", grid_json(fc.sh_grid)},
                     {"displacement_grid", grid_json(fc.displacement_grid)},
                     {"ao_grid", grid_json(fc.ao_grid)},
                     {"hidden_width", fc.hidden_width},
                     {"hidden_layers", fc.hidden_layers},
                     {"time_frequencies", fc.time_frequencies},
                     {"max_displacement", fc.max_displacement},
                     {"atlas_width", fc.atlas_width},
                     {"atlas_height", fc.atlas_height},
                     {"bounds_min", detail::to_json(m.fields.bounds.min)},
                     {"bounds_max", detail::to_json(m.fields.bounds.max)}};
  h["seed"] = ck.seed;
  try {
    h["config"] = json::parse(ck.config_json);
  } catch (const json::parse_error &) {
    throw Error(ErrorCode::InvalidParameter, "checkpoint config echo is not valid JSON");
  }

  std::vector<Section> sections;
  auto add = [&](std::string name, std::span<const double> d) { sections.push_back({std::move(name), {}, d}); };
  auto add_owned = [&](std::string name, std::vector<double> v) {
    sections.push_back({std::move(name), std::move(v), {}});
    sections.back().data = sections.back().owned;
  };
  sections.reserve(64);
  std::vector<double> sb(4 * n, -1.0), sw(4 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < m.skin[i].count; ++k) {
      sb[4 * i + k] = m.skin[i].bone[k];
      sw[4 * i + k] = m.skin[i].weight[k];
    }
  add_owned("skin.bones", std::move(sb));
  add_owned("skin.weights", std::move(sw));
  if (m.has_uv())
    add("uv", m.uv);
  for (const ParamBlock &b : parameter_blocks(m))
    add("param." + b.name, b.values);

  if (ck.train) {
    const TrainState &ts = *ck.train;
    json t;
    t["epoch"] = ts.epoch;
    t["step"] = ts.step;
    t["beta1"] = ts.adam.config().beta1;
    t["beta2"] = ts.adam.config().beta2;
    t["epsilon"] = ts.adam.config().epsilon;
    t["blocks"] = json::array();
    for (const AdamMoments &mo : ts.adam.moments()) {
      t["blocks"].push_back(json{{"name", mo.name}, {"step", mo.step}});
      if (is_row_block(mo.name)) {
        // Tables are stored sparsely: only entries whose moments are non-zero.
        std::vector<double> idx, mv, vv;
        for (std::size_t i = 0; i < mo.m.size(); ++i)
          if (mo.m[i] != 0.0 || mo.v[i] != 0.0) {
            idx.push_back(double(i));
            mv.push_back(mo.m[i]);
            vv.push_back(mo.v[i]);
          }
        add_owned("adam." + mo.name + ".index", std::move(idx));
        add_owned("adam." + mo.name + ".m", std::move(mv));
        add_owned("adam." + mo.name + ".v", std::move(vv));
      } else {
        add("adam." + mo.name + ".m", mo.m);
        add("adam." + mo.name + ".v", mo.v);
      }
    }
    h["train"] = t;
  }
  h["sections"] = json::array();
  for (const Section &s : sections)
    h["sections"].push_back(json{{"name", s.name}, {"count", s.data.size()}});

  const std::string header = h.dump();
  std::string buf(kMagic, 8);
  append_u32(buf, kCheckpointVersion);
  append_u32(buf, static_cast<std::uint32_t>(header.size()));
  buf += header;
  for (const Section &s : sections)
    buf.append(reinterpret_cast<const char *>(s.data.data()), s.data.size() * sizeof(double));
  const uLong crc = crc32_z(0L, reinterpret_cast<const Bytef *>(buf.data()), buf.size());
  append_u32(buf, static_cast<std::uint32_t>(crc));

  // Write to a sibling temp file and rename, so readers never see a partial file.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(ErrorCode::Io, tmp.string() + ": cannot open for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out)
      throw Error(ErrorCode::Io, tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  const std::string f = path.filename().string();
  std::string buf;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw Error(ErrorCode::Io, path.string() + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    buf = ss.str();
  }
  if (buf.size() < 20 || std::memcmp(buf.data(), kMagic, 8) != 0)
    throw Error(ErrorCode::Corrupt, f + ": not a checkpoint file (bad magic or truncated)");
  const std::uint32_t version = read_u32(buf, 8);
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::UnsupportedVersion, f + ": checkpoint version " + std::to_string(version) +
                                                   " is not supported (expected " +
                                                   std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t stored_crc = read_u32(buf, buf.size() - 4);
  if (crc32_z(0L, reinterpret_cast<const Bytef *>(buf.data()), buf.size() - 4) != stored_crc)
    throw Error(ErrorCode::Corrupt, f + ": checksum mismatch (file truncated or damaged)");
  const std::size_t hlen = read_u32(buf, 12);
  if (16 + hlen + 4 > buf.size())
    throw Error(ErrorCode::Corrupt, f + ": header length exceeds file size");

  json h;
  try {
    h = json::parse(buf.substr(16, hlen));
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::Corrupt, f + ": header is not valid JSON");
  }

  try {
    // Slice the payload into named sections.
    const json &secs = detail::get_array(detail::require(h, "sections", f), f + ".sections");
    std::map<std::string, std::span<const double>> data;
    std::size_t at = 16 + hlen;
    const std::size_t end = buf.size() - 4;
    std::vector<std::vector<double>> storage;
    storage.reserve(secs.size());
    for (std::size_t i = 0; i < secs.size(); ++i) {
      const std::string w = f + ".sections[" + std::to_string(i) + "]";
      const std::string name = detail::get_string(detail::require(secs[i], "name", w), w + ".name");
      const long long count = detail::get_integer(detail::require(secs[i], "count", w), w + ".count");
      if (count < 0 || std::size_t(count) > (end - at) / sizeof(double))
        throw Error(ErrorCode::Corrupt, f + ": section '" + name + "' runs past the end of the file");
      storage.emplace_back(std::size_t(count));
      std::memcpy(storage.back().data(), buf.data() + at, std::size_t(count) * sizeof(double));
      at += std::size_t(count) * sizeof(double);
      data[name] = storage.back();
    }
    if (at != end)
      throw Error(ErrorCode::Corrupt, f + ": trailing bytes after the last section");
    auto section = [&](const std::string &name, std::size_t expected) {
      auto it = data.find(name);
      if (it == data.end())
        throw Error(ErrorCode::Corrupt, f + ": missing section '" + name + "'");
      if (expected != std::size_t(-1) && it->second.size() != expected)
        throw Error(ErrorCode::Corrupt, f + ": section '" + name + "' has " + std::to_string(it->second.size()) +
                                            " values, expected " + std::to_string(expected));
      return it->second;
    };

    Checkpoint ck;
    SkinnedGaussianModel &m = ck.model;
    const std::size_t n = std::size_t(detail::get_integer(detail::require(h, "point_count", f), f + ".point_count"));
    const json &parents = detail::get_array(detail::require(h, "parents", f), f + ".parents");
    for (std::size_t i = 0; i < parents.size(); ++i)
      m.skeleton.parent.push_back(static_cast<int>(detail::get_integer(parents[i], f + ".parents")));
    m.sh_mode = parse_sh_mode(detail::get_string(detail::require(h, "sh_mode", f), f + ".sh_mode"));
    m.ao_active = detail::require(h, "ao_active", f).get<bool>();

    const json &fj = detail::require(h, "fields", f);
    const std::string fw = f + ".fields";
    FieldBankConfig fc;
    fc.sh_grid = grid_from_json(detail::require(fj, "sh_grid", fw), fw + ".sh_grid");
    fc.displacement_grid = grid_from_json(detail::require(fj, "displacement_grid", fw), fw + ".displacement_grid");
    fc.ao_grid = grid_from_json(detail::require(fj, "ao_grid", fw), fw + ".ao_grid");
    fc.hidden_width = static_cast<int>(detail::get_integer(detail::require(fj, "hidden_width", fw), fw));
    fc.hidden_layers = static_cast<int>(detail::get_integer(detail::require(fj, "hidden_layers", fw), fw));
    fc.time_frequencies = static_cast<int>(detail::get_integer(detail::require(fj, "time_frequencies", fw), fw));
    fc.max_displacement = detail::get_number(detail::require(fj, "max_displacement", fw), fw);
    fc.atlas_width = static_cast<int>(detail::get_integer(detail::require(fj, "atlas_width", fw), fw));
    fc.atlas_height = static_cast<int>(detail::get_integer(detail::require(fj, "atlas_height", fw), fw));
    Aabb box;
    box.min = detail::get_vec3(detail::require(fj, "bounds_min", fw), fw + ".bounds_min");
    box.max = detail::get_vec3(detail::require(fj, "bounds_max", fw), fw + ".bounds_max");
    m.fields = FieldBank(fc, box, 0);

    m.centers.resize(3 * n);
    m.rotations.resize(4 * n);
    m.log_scales.resize(3 * n);
    m.opacity_logits.resize(n);
    m.skeleton.joints.resize(3 * parents.size());
    if (detail::require(h, "has_uv", f).get<bool>()) {
      const auto uv = section("uv", 2 * n);
      m.uv.assign(uv.begin(), uv.end());
    }
    const auto sb = section("skin.bones", 4 * n), sw = section("skin.weights", 4 * n);
    m.skin.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      SkinWeights &w = m.skin[i];
      for (int k = 0; k < kMaxInfluences; ++k) {
        if (sb[4 * i + k] < 0.0)
          continue;
        w.bone[w.count] = static_cast<int>(sb[4 * i + k]);
        w.weight[w.count] = sw[4 * i + k];
        ++w.count;
      }
    }
    for (ParamBlock &b : parameter_blocks(m)) {
      const auto s = section("param." + b.name, b.values.size());
      std::copy(s.begin(), s.end(), b.values.begin());
    }
    m.validate();

    ck.seed = detail::require(h, "seed", f).get<std::uint64_t>();
    ck.config_json = h.contains("config") ? h["config"].dump() : "{}";

    if (h.contains("train")) {
      const json &t = h["train"];
      const std::string tw = f + ".train";
      AdamConfig ac;
      ac.beta1 = detail::get_number(detail::require(t, "beta1", tw), tw + ".beta1");
      ac.beta2 = detail::get_number(detail::require(t, "beta2", tw), tw + ".beta2");
      ac.epsilon = detail::get_number(detail::require(t, "epsilon", tw), tw + ".epsilon");
      TrainState ts;
      ts.epoch = static_cast<int>(detail::get_integer(detail::require(t, "epoch", tw), tw + ".epoch"));
      ts.step = detail::require(t, "step", tw).get<std::uint64_t>();
      ts.adam = Adam(m, ac);
      const json &blocks = detail::get_array(detail::require(t, "blocks", tw), tw + ".blocks",
                                             ts.adam.moments().size());
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        AdamMoments &mo = ts.adam.moments()[k];
        if (detail::get_string(detail::require(blocks[k], "name", tw), tw + ".blocks") != mo.name)
          throw Error(ErrorCode::Corrupt, f + ": optimizer block order does not match the model");
        mo.step = detail::require(blocks[k], "step", tw).get<std::uint64_t>();
        if (is_row_block(mo.name)) {
          const auto idx = section("adam." + mo.name + ".index", std::size_t(-1));
          const auto mv = section("adam." + mo.name + ".m", idx.size());
          const auto vv = section("adam." + mo.name + ".v", idx.size());
          for (std::size_t i = 0; i < idx.size(); ++i) {
            if (!(idx[i] >= 0.0 && idx[i] < double(mo.m.size())))
              throw Error(ErrorCode::Corrupt, f + ": optimizer index out of range in '" + mo.name + "'");
            mo.m[std::size_t(idx[i])] = mv[i];
            mo.v[std::size_t(idx[i])] = vv[i];
          }
        } else {
          const auto mv = section("adam." + mo.name + ".m", mo.m.size());
          const auto vv = section("adam." + mo.name + ".v", mo.v.size());
          std::copy(mv.begin(), mv.end(), mo.m.begin());
          std::copy(vv.begin(), vv.end(), mo.v.begin());
        }
      }
      ck.train = std::move(ts);
    }
    return ck;
  } catch (const Error &e) {
    if (e.code() == ErrorCode::Schema)
      throw Error(ErrorCode::Corrupt, e.what());
    throw;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::Corrupt, f + ": malformed header (" + e.what() + ")");
  }
}

} // namespace avsplat
