#pragma once

#include "avsplat/image.hpp"

#include <filesystem>

namespace avsplat {

double srgb_to_linear(double c);
double linear_to_srgb(double c);

/// Linear value -> nearest 8-bit sRGB code.
std::uint8_t encode_srgb8(double linear);
/// Round trip through 8-bit sRGB, i.e. what a saved and reloaded image holds.
Image quantize_srgb8(ImageView img);

/// Reads an 8-bit RGB or RGBA PNG (alpha dropped) into linear color.
Image load_png(const std::filesystem::path &path);
/// Writes linear color as 8-bit sRGB.
void save_png(const std::filesystem::path &path, ImageView img);

} // namespace avsplat
