#pragma once

// Checked accessors for the JSON-based formats. Every failure names the
// file and the JSON path of the offending value.

#include "avsplat/common.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace avsplat::detail {

using json = nlohmann::json;

json read_json_file(const std::filesystem::path &path);
void write_text_file(const std::filesystem::path &path, const std::string &text);

[[noreturn]] void schema_error(const std::string &where, const std::string &msg);

const json &require(const json &obj, const char *key, const std::string &where);
double get_number(const json &v, const std::string &where);
long long get_integer(const json &v, const std::string &where);
std::string get_string(const json &v, const std::string &where);
const json &get_array(const json &v, const std::string &where, std::size_t expected_size = std::size_t(-1));
std::vector<double> get_numbers(const json &v, const std::string &where, std::size_t expected_size = std::size_t(-1));
Vec3 get_vec3(const json &v, const std::string &where);

json to_json(const Vec3 &v);

} // namespace avsplat::detail
