#include "orthomatch/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace orthomatch {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0) fail(ErrorCode::InvalidArgument, "negative image size");
  if (channels != 1 && channels != 3) fail(ErrorCode::InvalidArgument, "images have 1 or 3 channels");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image::Image(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (channels != 1 && channels != 3) fail(ErrorCode::InvalidArgument, "images have 1 or 3 channels");
  if (width < 0 || height < 0 || data_.size() != static_cast<std::size_t>(width) * height * channels)
    fail(ErrorCode::InvalidArgument, "image data length does not match dimensions");
}

void Image::validate() const {
  for (float v : data_)
    if (!(v >= 0.0f && v <= 1.0f)) fail(ErrorCode::InvariantError, "pixel value outside [0, 1]");
}

DepthMap::DepthMap(int width, int height) : width_(width), height_(height) {
  if (width < 0 || height < 0) fail(ErrorCode::InvalidArgument, "negative depth map size");
  depth_.assign(static_cast<std::size_t>(width) * height, 0.0f);
  valid_.assign(depth_.size(), 0);
}

void DepthMap::set(int x, int y, float meters) {
  if (std::isfinite(meters) && meters > 0) {
    depth_[idx(x, y)] = meters;
    valid_[idx(x, y)] = 1;
  } else {
    invalidate(x, y);
  }
}

void DepthMap::invalidate(int x, int y) {
  depth_[idx(x, y)] = 0.0f;
  valid_[idx(x, y)] = 0;
}

std::size_t DepthMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), 1));
}

namespace {

// Tap layout for a bilinear lookup at (x, y). Taps with zero weight may sit on
// the last row/column so exact pixel centers on the border stay in-bounds.
struct Taps {
  int x0, y0, x1, y1;
  double fx, fy;
};

bool bilinear_taps(int w, int h, double x, double y, Taps& t) {
  if (!(x >= 0 && y >= 0 && x <= w - 1 && y <= h - 1)) return false;
  t.x0 = static_cast<int>(std::floor(x));
  t.y0 = static_cast<int>(std::floor(y));
  t.fx = x - t.x0;
  t.fy = y - t.y0;
  if (t.x0 >= w - 1) {
    t.x0 = w - 1;
    t.fx = 0;
  }
  if (t.y0 >= h - 1) {
    t.y0 = h - 1;
    t.fy = 0;
  }
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  return true;
}

float blend(const Image& img, const Taps& t, int c) {
  if (t.fx == 0 && t.fy == 0) return img.at(t.x0, t.y0, c);
  const double a = img.at(t.x0, t.y0, c), b = img.at(t.x1, t.y0, c);
  const double d = img.at(t.x0, t.y1, c), e = img.at(t.x1, t.y1, c);
  const double top = a + (b - a) * t.fx;
  const double bottom = d + (e - d) * t.fx;
  return static_cast<float>(std::clamp(top + (bottom - top) * t.fy, 0.0, 1.0));
}

WarpResult warp_impl(const Image& src, const DepthMap* mask, const Homographyd& h, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) fail(ErrorCode::InvalidArgument, "warp output size must be positive");
  const Mat3 inv = invert(h).matrix();
  WarpResult out{Image(out_w, out_h, src.channels()), std::vector<std::uint8_t>(static_cast<std::size_t>(out_w) * out_h, 0)};
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const Vec3 q = inv * Vec3(x, y, 1.0);
      if (std::abs(q.z()) < 1e-12 || q.z() < 0) continue;
      Taps t;
      if (!bilinear_taps(src.width(), src.height(), q.x() / q.z(), q.y() / q.z(), t)) continue;
      if (mask && !(mask->valid(t.x0, t.y0) && mask->valid(t.x1, t.y0) && mask->valid(t.x0, t.y1) &&
                    mask->valid(t.x1, t.y1)))
        continue;
      for (int c = 0; c < src.channels(); ++c) out.image.at(x, y, c) = blend(src, t, c);
      out.validity[static_cast<std::size_t>(y) * out_w + x] = 1;
    }
  }
  return out;
}

}  // namespace

std::size_t WarpResult::valid_count() const {
  return static_cast<std::size_t>(std::count(validity.begin(), validity.end(), 1));
}

bool sample_bilinear(const Image& img, double x, double y, int channel, float& out) {
  Taps t;
  if (!bilinear_taps(img.width(), img.height(), x, y, t)) return false;
  out = blend(img, t, channel);
  return true;
}

bool DepthMap::sample(double x, double y, double& out) const {
  Taps t;
  if (!bilinear_taps(width_, height_, x, y, t)) return false;
  if (!(valid(t.x0, t.y0) && valid(t.x1, t.y0) && valid(t.x0, t.y1) && valid(t.x1, t.y1))) return false;
  const double top = depth(t.x0, t.y0) + (depth(t.x1, t.y0) - depth(t.x0, t.y0)) * t.fx;
  const double bottom = depth(t.x0, t.y1) + (depth(t.x1, t.y1) - depth(t.x0, t.y1)) * t.fx;
  out = top + (bottom - top) * t.fy;
  return true;
}

WarpResult warp(const Image& src, const Homographyd& h, int out_width, int out_height) {
  return warp_impl(src, nullptr, h, out_width, out_height);
}

WarpResult warp(const Image& src, const DepthMap& mask, const Homographyd& h, int out_width, int out_height) {
  if (mask.width() != src.width() || mask.height() != src.height())
    fail(ErrorCode::DimensionMismatch, "depth mask size differs from image size");
  return warp_impl(src, &mask, h, out_width, out_height);
}

Image grayscale(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double v = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
      out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  return out;
}

GradientField gradients(const Image& gray) {
  if (gray.channels() != 1) fail(ErrorCode::InvalidArgument, "gradients need a single-channel image");
  const int w = gray.width(), h = gray.height();
  GradientField g{w, h, std::vector<float>(static_cast<std::size_t>(w) * h), std::vector<float>(static_cast<std::size_t>(w) * h)};
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      g.gx[i] = 0.5f * (gray.at(xp, y) - gray.at(xm, y));
      g.gy[i] = 0.5f * (gray.at(x, yp) - gray.at(x, ym));
    }
  }
  return g;
}

std::vector<Vec3> backproject(const DepthMap& depth, const Intrinsicsd& k, const PixelRect& roi) {
  if (roi.empty() || !roi.within(depth.width(), depth.height()))
    fail(ErrorCode::InvalidArgument, "ROI is empty or outside the depth map");
  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(roi.width()) * roi.height());
  for (int v = roi.y0; v < roi.y1; ++v)
    for (int u = roi.x0; u < roi.x1; ++u)
      if (depth.valid(u, v)) points.push_back(static_cast<double>(depth.depth(u, v)) * k.ray(u, v));
  if (points.empty()) fail(ErrorCode::EmptyROI, "no valid depth inside the ROI");
  return points;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0)) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : kernel) v /= sum;

  const int w = img.width(), h = img.height(), ch = img.channels();
  Image tmp(w, h, ch), out(w, h, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * img.at(std::clamp(x + i, 0, w - 1), y, c);
        tmp.at(x, y, c) = static_cast<float>(acc);
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp.at(x, std::clamp(y + i, 0, h - 1), c);
        out.at(x, y, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
  return out;
}

}  // namespace orthomatch
