#include "json_util.hpp"

#include <fstream>
#include <sstream>

namespace avsplat::detail {

json read_json_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::Schema, path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

void write_text_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::Io, path.string() + ": cannot open for writing");
  out << text;
  if (!out)
    throw Error(ErrorCode::Io, path.string() + ": write failed");
}

void schema_error(const std::string &where, const std::string &msg) {
  throw Error(ErrorCode::Schema, where + ": " + msg);
}

const json &require(const json &obj, const char *key, const std::string &where) {
  if (!obj.is_object())
    schema_error(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    schema_error(where, std::string("missing field '") + key + "'");
  return *it;
}

double get_number(const json &v, const std::string &where) {
  if (!v.is_number())
    schema_error(where, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d))
    schema_error(where, "expected a finite number");
  return d;
}

long long get_integer(const json &v, const std::string &where) {
  if (!v.is_number_integer())
    schema_error(where, "expected an integer");
  return v.get<long long>();
}

std::string get_string(const json &v, const std::string &where) {
  if (!v.is_string())
    schema_error(where, "expected a string");
  return v.get<std::string>();
}

const json &get_array(const json &v, const std::string &where, std::size_t expected) {
  if (!v.is_array())
    schema_error(where, "expected an array");
  if (expected != std::size_t(-1) && v.size() != expected)
    schema_error(where, "expected " + std::to_string(expected) + " entries, found " + std::to_string(v.size()));
  return v;
}

std::vector<double> get_numbers(const json &v, const std::string &where, std::size_t expected) {
  get_array(v, where, expected);
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(get_number(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

Vec3 get_vec3(const json &v, const std::string &where) {
  const std::vector<double> a = get_numbers(v, where, 3);
  return Vec3(a[0], a[1], a[2]);
}

json to_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

} // namespace avsplat::detail
