#include "avsplat/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <memory>

namespace avsplat {

namespace {

// Decoding table for 8-bit codes; also the reference for quantization.
const std::array<double, 256> &srgb8_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i)
      t[i] = srgb_to_linear(i / 255.0);
    return t;
  }();
  return table;
}

struct FileCloser {
  void operator()(std::FILE *f) const { std::fclose(f); }
};

} // namespace

double srgb_to_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double linear_to_srgb(double c) {
  c = std::clamp(c, 0.0, 1.0);
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

std::uint8_t encode_srgb8(double linear) {
  if (!(linear == linear))
    return 0;
  return static_cast<std::uint8_t>(std::lround(linear_to_srgb(linear) * 255.0));
}

Image quantize_srgb8(ImageView img) {
  Image out(img.width, img.height);
  const auto &t = srgb8_table();
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = t[encode_srgb8(img.data[i])];
  return out;
}

Image load_png(const std::filesystem::path &path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f)
    throw Error(ErrorCode::Io, path.string() + ": cannot open image");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw Error(ErrorCode::Corrupt, path.string() + ": not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::Internal, "libpng initialization failed");
  }
  Image img;
  std::vector<png_byte> raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Corrupt, path.string() + ": PNG decode failed");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info), type = png_get_color_type(png, info);
  if (depth == 16)
    png_set_strip_16(png);
  if (type == PNG_COLOR_TYPE_PALETTE)
    png_set_palette_to_rgb(png);
  if (type == PNG_COLOR_TYPE_GRAY || type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (depth < 8)
      png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);
  if (png_get_channels(png, info) != 3 || w == 0 || h == 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Corrupt, path.string() + ": unsupported PNG layout");
  }
  raw.resize(std::size_t(w) * h * 3);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = raw.data() + std::size_t(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = Image(static_cast<int>(w), static_cast<int>(h));
  const auto &t = srgb8_table();
  for (std::size_t i = 0; i < raw.size(); ++i)
    img.data[i] = t[raw[i]];
  return img;
}

void save_png(const std::filesystem::path &path, ImageView img) {
  if (img.width <= 0 || img.height <= 0 || img.data.size() != 3 * img.pixel_count())
    throw Error(ErrorCode::DimensionMismatch, "save_png: bad image shape");
  std::vector<png_byte> raw(img.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = encode_srgb8(img.data[i]);

  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f)
    throw Error(ErrorCode::Io, path.string() + ": cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::Internal, "libpng initialization failed");
  }
  std::vector<png_bytep> rows(std::size_t(img.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, path.string() + ": PNG encode failed");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or other variable chunks, so output bytes depend only on pixels.
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    rows[y] = raw.data() + std::size_t(y) * img.width * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

} // namespace avsplat
