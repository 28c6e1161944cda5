#include "avsplat/template_io.hpp"

#include "json_util.hpp"

#include <bit>
#include <cstring>

namespace avsplat {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

using detail::json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z')
    return c - 'A';
  if (c >= 'a' && c <= 'z')
    return c - 'a' + 26;
  if (c >= '0' && c <= '9')
    return c - '0' + 52;
  if (c == '+')
    return 62;
  if (c == '/')
    return 63;
  return -1;
}

// Decodes a numeric block into doubles; shape is checked against expected_cols.
std::vector<double> read_block(const json &v, const std::string &where, std::size_t rows, std::size_t cols) {
  const std::size_t expected = rows * cols;
  if (v.is_array()) {
    // Accept both flat and nested [[...], ...] layouts.
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string w = where + "[" + std::to_string(i) + "]";
      if (v[i].is_array()) {
        const std::vector<double> row = detail::get_numbers(v[i], w, cols);
        out.insert(out.end(), row.begin(), row.end());
      } else {
        out.push_back(detail::get_number(v[i], w));
      }
    }
    if (out.size() != expected)
      detail::schema_error(where, "expected " + std::to_string(expected) + " values, found " +
                                      std::to_string(out.size()));
    return out;
  }
  const std::string dtype = detail::get_string(detail::require(v, "dtype", where), where + ".dtype");
  const std::vector<double> shape = detail::get_numbers(detail::require(v, "shape", where), where + ".shape", 2);
  if (shape[0] != double(rows) || shape[1] != double(cols))
    detail::schema_error(where + ".shape", "expected [" + std::to_string(rows) + ", " + std::to_string(cols) + "]");
  std::vector<std::uint8_t> bytes;
  try {
    bytes = base64_decode(detail::get_string(detail::require(v, "base64", where), where + ".base64"));
  } catch (const Error &e) {
    detail::schema_error(where + ".base64", e.what());
  }
  const std::size_t width = dtype == "f64le" ? 8 : (dtype == "f32le" || dtype == "i32le") ? 4 : 0;
  if (width == 0)
    detail::schema_error(where + ".dtype", "unsupported dtype '" + dtype + "'");
  if (bytes.size() != expected * width)
    detail::schema_error(where + ".base64", "decoded " + std::to_string(bytes.size()) + " bytes, expected " +
                                                std::to_string(expected * width));
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    const std::uint8_t *p = bytes.data() + i * width;
    if (dtype == "f64le") {
      std::memcpy(&out[i], p, 8);
    } else if (dtype == "f32le") {
      float f;
      std::memcpy(&f, p, 4);
      out[i] = f;
    } else {
      std::int32_t k;
      std::memcpy(&k, p, 4);
      out[i] = k;
    }
    if (!std::isfinite(out[i]))
      detail::schema_error(where, "non-finite value at index " + std::to_string(i));
  }
  return out;
}

json f64_block(const std::vector<double> &v, std::size_t cols) {
  const auto *p = reinterpret_cast<const std::uint8_t *>(v.data());
  return json{{"dtype", "f64le"},
              {"shape", {v.size() / cols, cols}},
              {"base64", base64_encode({p, v.size() * sizeof(double)})}};
}

json i32_block(const std::vector<std::int32_t> &v, std::size_t cols) {
  const auto *p = reinterpret_cast<const std::uint8_t *>(v.data());
  return json{{"dtype", "i32le"},
              {"shape", {v.size() / cols, cols}},
              {"base64", base64_encode({p, v.size() * sizeof(std::int32_t)})}};
}

} // namespace

std::string base64_encode(std::span<const std::uint8_t> in) {
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t(in[i]) << 16) | (std::uint32_t(in[i + 1]) << 8) | in[i + 2];
    for (int s = 18; s >= 0; s -= 6)
      out.push_back(kAlphabet[(v >> s) & 63]);
  }
  const std::size_t rest = in.size() - i;
  if (rest > 0) {
    std::uint32_t v = std::uint32_t(in[i]) << 16;
    if (rest == 2)
      v |= std::uint32_t(in[i + 1]) << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string &text) {
  if (text.size() % 4 != 0)
    throw Error(ErrorCode::Schema, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0 || (v[k] = b64_value(c)) < 0)
        throw Error(ErrorCode::Schema, "invalid base64 character at offset " + std::to_string(i + k));
    }
    const std::uint32_t w = (std::uint32_t(v[0]) << 18) | (std::uint32_t(v[1]) << 12) | (std::uint32_t(v[2]) << 6) |
                            std::uint32_t(v[3]);
    out.push_back(std::uint8_t(w >> 16));
    if (pad < 2)
      out.push_back(std::uint8_t(w >> 8));
    if (pad < 1)
      out.push_back(std::uint8_t(w));
  }
  return out;
}

TemplateModel load_template(const std::filesystem::path &path) {
  const std::string f = path.filename().string();
  const json root = detail::read_json_file(path);
  const long long version = detail::get_integer(detail::require(root, "version", f), f + ".version");
  if (version != kTemplateVersion)
    throw Error(ErrorCode::UnsupportedVersion, f + ": template version " + std::to_string(version));

  TemplateModel t;
  const json &parents = detail::get_array(detail::require(root, "parents", f), f + ".parents");
  for (std::size_t i = 0; i < parents.size(); ++i)
    t.skeleton.parent.push_back(
        static_cast<int>(detail::get_integer(parents[i], f + ".parents[" + std::to_string(i) + "]")));
  const std::size_t nb = parents.size();
  t.skeleton.joints = read_block(detail::require(root, "joints", f), f + ".joints", nb, 3);

  const long long nv = detail::get_integer(detail::require(root, "vertex_count", f), f + ".vertex_count");
  if (nv < 1)
    detail::schema_error(f + ".vertex_count", "must be >= 1");
  const std::size_t n = std::size_t(nv);
  t.vertices = read_block(detail::require(root, "vertices", f), f + ".vertices", n, 3);

  // Skin: up to 4 (bone, weight) pairs per vertex; bone -1 marks an unused slot.
  const std::vector<double> bones = read_block(detail::require(root, "skin_bones", f), f + ".skin_bones", n, 4);
  const std::vector<double> wts = read_block(detail::require(root, "skin_weights", f), f + ".skin_weights", n, 4);
  t.weights.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    SkinWeights &w = t.weights[v];
    for (int k = 0; k < kMaxInfluences; ++k) {
      const double b = bones[4 * v + k];
      if (b < 0.0)
        continue;
      if (b != std::floor(b) || b >= double(nb))
        detail::schema_error(f + ".skin_bones[" + std::to_string(v) + "]", "invalid bone index");
      w.bone[w.count] = static_cast<int>(b);
      w.weight[w.count] = wts[4 * v + k];
      ++w.count;
    }
    if (w.count == 0)
      detail::schema_error(f + ".skin_bones[" + std::to_string(v) + "]", "vertex has no influences");
  }
  if (root.contains("uv") && !root["uv"].is_null())
    t.uv = read_block(root["uv"], f + ".uv", n, 2);
  try {
    t.validate_and_normalize(1e-4);
  } catch (const Error &e) {
    throw Error(e.code(), f + ": " + e.what());
  }
  return t;
}

void save_template(const TemplateModel &t, const std::filesystem::path &path) {
  json root;
  root["format"] = "avsplat-template";
  root["version"] = kTemplateVersion;
  root["vertex_count"] = t.vertex_count();
  root["parents"] = t.skeleton.parent;
  root["joints"] = f64_block(t.skeleton.joints, 3);
  root["vertices"] = f64_block(t.vertices, 3);
  std::vector<std::int32_t> bones(4 * t.vertex_count(), -1);
  std::vector<double> wts(4 * t.vertex_count(), 0.0);
  for (std::size_t v = 0; v < t.vertex_count(); ++v)
    for (int k = 0; k < t.weights[v].count; ++k) {
      bones[4 * v + k] = t.weights[v].bone[k];
      wts[4 * v + k] = t.weights[v].weight[k];
    }
  root["skin_bones"] = i32_block(bones, 4);
  root["skin_weights"] = f64_block(wts, 4);
  if (t.has_uv())
    root["uv"] = f64_block(t.uv, 2);
  detail::write_text_file(path, root.dump(1) + "\n");
}

} // namespace avsplat
