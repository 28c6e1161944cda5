#pragma once

#include "avsplat/template_model.hpp"

#include <filesystem>
#include <string>

namespace avsplat {

inline constexpr int kTemplateVersion = 1;

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws Schema on characters outside the standard alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(const std::string &text);

/// Reads a template JSON file. Array blocks may be plain JSON arrays or
/// {"dtype": "f64le" | "f32le" | "i32le", "shape": [...], "base64": "..."}.
TemplateModel load_template(const std::filesystem::path &path);
/// Writes a template with base64 f64le / i32le blocks.
void save_template(const TemplateModel &tmpl, const std::filesystem::path &path);

} // namespace avsplat
