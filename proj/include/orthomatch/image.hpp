#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "orthomatch/geometry.hpp"

namespace orthomatch {

/// Row-major raster with 1 or 3 interleaved channels, values in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 1, float fill = 0.0f);
  Image(int width, int height, int channels, std::vector<float> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }
  float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool contains(double x, double y) const {
    return x >= 0 && y >= 0 && x <= width_ - 1 && y <= height_ - 1;
  }

  /// Throws InvariantError if any value is outside [0, 1] or non-finite.
  void validate() const;

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<float> data_;
};

/// Metric depth in meters with a per-pixel validity mask.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  float depth(int x, int y) const { return depth_[idx(x, y)]; }
  bool valid(int x, int y) const { return valid_[idx(x, y)] != 0; }

  /// Non-finite or non-positive depths are stored as invalid.
  void set(int x, int y, float meters);
  void invalidate(int x, int y);

  /// Bilinear depth at a subpixel location; false unless all four taps are valid.
  bool sample(double x, double y, double& out) const;

  std::size_t valid_count() const;

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> depth_;
  std::vector<std::uint8_t> valid_;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool within(int w, int h) const { return x0 >= 0 && y0 >= 0 && x1 <= w && y1 <= h; }
  bool operator==(const PixelRect&) const = default;
};

struct WarpResult {
  Image image;
  std::vector<std::uint8_t> validity;  // 1 where all bilinear taps were in-bounds

  bool valid(int x, int y) const { return validity[static_cast<std::size_t>(y) * image.width() + x] != 0; }
  std::size_t valid_count() const;
};

/// Bilinear sample; returns false if (x, y) lies outside the pixel-center hull.
bool sample_bilinear(const Image& img, double x, double y, int channel, float& out);

/// Inverse-mapped bilinear warp: output pixel p takes src(H^-1 p).
WarpResult warp(const Image& src, const Homographyd& h, int out_width, int out_height);

/// Same, except sampling is also rejected where any depth tap of `mask` is invalid.
WarpResult warp(const Image& src, const DepthMap& mask, const Homographyd& h, int out_width, int out_height);

/// Luma 0.299 R + 0.587 G + 0.114 B; single-channel input is returned unchanged.
Image grayscale(const Image& img);

/// Signed x/y derivatives of a single-channel image, row-major.
struct GradientField {
  int width = 0, height = 0;
  std::vector<float> gx, gy;
  float x_at(int x, int y) const { return gx[static_cast<std::size_t>(y) * width + x]; }
  float y_at(int x, int y) const { return gy[static_cast<std::size_t>(y) * width + x]; }
};

/// Central differences with replicated borders; values lie in [-0.5, 0.5].
GradientField gradients(const Image& gray);

/// depth * K^-1 (u, v, 1) for every valid pixel of the ROI.
std::vector<Vec3> backproject(const DepthMap& depth, const Intrinsicsd& k, const PixelRect& roi);

Image gaussian_blur(const Image& img, double sigma);

}  // namespace orthomatch
