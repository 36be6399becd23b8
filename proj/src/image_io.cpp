#include "orthomatch/image_io.hpp"

#include <png.h>

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <cstring>
#include <string>
#include <memory>
#include <vector>

namespace orthomatch {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorCode::IOError, "cannot open " + path.string());
  return f;
}

void on_png_error(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

// Decoded raster: samples are host-order 16-bit or 8-bit values.
struct RawPng {
  int width = 0, height = 0, channels = 0, bit_depth = 0;
  std::vector<std::uint16_t> samples;
};

RawPng decode(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    fail(ErrorCode::FormatError, path.string() + " is not a PNG file");

  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) fail(ErrorCode::IOError, "libpng initialization failed");

  RawPng raw;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::FormatError, path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * raw.height);
  rows.resize(raw.height);
  for (int y = 0; y < raw.height; ++y) rows[y] = buffer.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * raw.channels;
  raw.samples.resize(n);
  if (raw.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint16_t v;
      std::memcpy(&v, buffer.data() + 2 * i, 2);
      raw.samples[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) raw.samples[i] = buffer[i];
  }
  return raw;
}

void encode(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
            const std::vector<unsigned char>& bytes) {
  FilePtr file = open_file(path, "wb");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) fail(ErrorCode::IOError, "libpng initialization failed");
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = const_cast<unsigned char*>(bytes.data()) + stride * y;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::IOError, path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  const RawPng raw = decode(path);
  const double scale = raw.bit_depth == 16 ? 65535.0 : 255.0;
  const int out_channels = raw.channels >= 3 ? 3 : 1;
  Image img(raw.width, raw.height, out_channels);
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x)
      for (int c = 0; c < out_channels; ++c) {
        const std::size_t i = (static_cast<std::size_t>(y) * raw.width + x) * raw.channels + c;
        img.at(x, y, c) = static_cast<float>(raw.samples[i] / scale);
      }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.empty()) fail(ErrorCode::InvalidArgument, "cannot write an empty image");
  std::vector<unsigned char> bytes(img.data().size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data()[i], 0.0f, 1.0f) * 255.0f));
  encode(path, img.width(), img.height(), img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, 8, bytes);
}

DepthMap read_depth_png(const std::filesystem::path& path, std::optional<ImageSize> expected) {
  const RawPng raw = decode(path);
  if (raw.bit_depth != 16 || raw.channels != 1)
    fail(ErrorCode::FormatError, path.string() + ": depth maps must be 16-bit single-channel PNG");
  if (expected && (expected->width != raw.width || expected->height != raw.height))
    fail(ErrorCode::DimensionMismatch, path.string() + ": depth size " + std::to_string(raw.width) + "x" +
                                           std::to_string(raw.height) + " does not match image size " +
                                           std::to_string(expected->width) + "x" + std::to_string(expected->height));
  DepthMap depth(raw.width, raw.height);
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x) {
      const std::uint16_t mm = raw.samples[static_cast<std::size_t>(y) * raw.width + x];
      if (mm > 0) depth.set(x, y, static_cast<float>(mm / 1000.0));
    }
  return depth;
}

void write_depth_png(const std::filesystem::path& path, const DepthMap& depth) {
  std::vector<unsigned char> bytes(static_cast<std::size_t>(depth.width()) * depth.height() * 2, 0);
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) {
      std::uint16_t mm = 0;
      if (depth.valid(x, y)) {
        const long v = std::lround(static_cast<double>(depth.depth(x, y)) * 1000.0);
        mm = (v >= 1 && v <= 65535) ? static_cast<std::uint16_t>(v) : 0;
      }
      std::memcpy(bytes.data() + 2 * (static_cast<std::size_t>(y) * depth.width() + x), &mm, 2);
    }
  encode(path, depth.width(), depth.height(), PNG_COLOR_TYPE_GRAY, 16, bytes);
}

}  // namespace orthomatch
