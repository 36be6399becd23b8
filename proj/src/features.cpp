#include "orthomatch/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace orthomatch {

std::string_view to_string(HeadTag head) {
  switch (head) {
    case HeadTag::Vanilla: return "vanilla";
    case HeadTag::Robust: return "robust";
    case HeadTag::External: return "external";
  }
  return "unknown";
}

HeadTag head_from_string(std::string_view name) {
  if (name == "vanilla") return HeadTag::Vanilla;
  if (name == "robust") return HeadTag::Robust;
  if (name == "external") return HeadTag::External;
  fail(ErrorCode::InvalidArgument, "unknown descriptor head '" + std::string(name) + "'");
}

void DescriptorSet::validate() const {
  if (static_cast<std::size_t>(vectors.cols()) != keypoints.size())
    fail(ErrorCode::InvariantError, "descriptor count does not match keypoint count");
  for (Eigen::Index i = 0; i < vectors.cols(); ++i) {
    const double n = vectors.col(i).cast<double>().norm();
    if (!(std::abs(n - 1.0) <= 1e-6)) fail(ErrorCode::InvariantError, "descriptor " + std::to_string(i) + " is not unit length");
  }
  for (const Keypoint& kp : keypoints)
    if (!std::isfinite(kp.x) || !std::isfinite(kp.y) || !(kp.score >= 0))
      fail(ErrorCode::InvariantError, "invalid keypoint");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Separable Gaussian on a signed float field with replicated borders.
std::vector<float> smooth(const std::vector<float>& in, int w, int h, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : kernel) v /= sum;
  std::vector<float> tmp(in.size()), out(in.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * in[y * w + std::clamp(x + i, 0, w - 1)];
      tmp[y * w + x] = static_cast<float>(acc);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp[std::clamp(y + i, 0, h - 1) * w + x];
      out[y * w + x] = static_cast<float>(acc);
    }
  return out;
}

double quadratic_offset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (!(denom < 0)) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

bool gradient_at(const GradientField& g, double x, double y, double& gx, double& gy) {
  if (!(x >= 0 && y >= 0 && x <= g.width - 1 && y <= g.height - 1)) return false;
  int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  double fx = x - x0, fy = y - y0;
  if (x0 >= g.width - 1) x0 = g.width - 1, fx = 0;
  if (y0 >= g.height - 1) y0 = g.height - 1, fy = 0;
  const int x1 = std::min(x0 + 1, g.width - 1), y1 = std::min(y0 + 1, g.height - 1);
  auto lerp2 = [&](const std::vector<float>& f) {
    const double a = f[y0 * g.width + x0], b = f[y0 * g.width + x1];
    const double c = f[y1 * g.width + x0], d = f[y1 * g.width + x1];
    const double top = a + (b - a) * fx, bottom = c + (d - c) * fx;
    return top + (bottom - top) * fy;
  };
  gx = lerp2(g.gx);
  gy = lerp2(g.gy);
  return true;
}

// Patch sample offsets: a centered 16x16 grid at unit spacing.
constexpr double patch_offset(int i) { return i - (kPatchSize - 1) / 2.0; }

bool patch_descriptor(const Image& gray, const Keypoint& kp, double angle, Eigen::Ref<Eigen::VectorXf> out) {
  const double c = std::cos(angle), s = std::sin(angle);
  std::array<double, kPatchSize * kPatchSize> patch{};
  for (int j = 0; j < kPatchSize; ++j)
    for (int i = 0; i < kPatchSize; ++i) {
      const double u = patch_offset(i), v = patch_offset(j);
      float value;
      if (!sample_bilinear(gray, kp.x + c * u - s * v, kp.y + s * u + c * v, 0, value)) return false;
      patch[j * kPatchSize + i] = value;
    }
  double mean = 0;
  for (double v : patch) mean += v;
  mean /= patch.size();
  double var = 0;
  for (double v : patch) var += (v - mean) * (v - mean);
  const double sd = std::max(std::sqrt(var / patch.size()), 1e-6);

  constexpr int pooled = kPatchSize / 2;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(out.size());
  for (int j = 0; j < pooled; ++j)
    for (int i = 0; i < pooled; ++i) {
      double acc = 0;
      for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) acc += (patch[(2 * j + dj) * kPatchSize + 2 * i + di] - mean) / sd;
      d(j * pooled + i) = acc / 4.0;
    }
  const double norm = d.norm();
  if (!(norm > 1e-9)) return false;
  out = (d / norm).cast<float>();
  return true;
}

DescriptorSet describe_impl(const Image& gray, const std::vector<Keypoint>& kps, HeadTag head) {
  if (gray.channels() != 1) fail(ErrorCode::InvalidArgument, "descriptors need a single-channel image");
  GradientField grad;
  if (head == HeadTag::Robust) grad = gradients(gray);

  DescriptorSet set;
  set.head = head;
  set.vectors.resize(kDescriptorDim, static_cast<Eigen::Index>(kps.size()));
  Eigen::VectorXf column(kDescriptorDim);
  for (const Keypoint& kp : kps) {
    Keypoint described = kp;
    double angle = 0;
    if (head == HeadTag::Robust) {
      try {
        angle = estimate_orientation(grad, kp);
      } catch (const Error&) {
        continue;
      }
      described.orientation = static_cast<float>(angle);
    } else {
      described.orientation = 0;
    }
    column.setZero();
    if (!patch_descriptor(gray, kp, angle, column)) continue;
    set.vectors.col(static_cast<Eigen::Index>(set.keypoints.size())) = column;
    set.keypoints.push_back(described);
  }
  set.vectors.conservativeResize(kDescriptorDim, static_cast<Eigen::Index>(set.keypoints.size()));
  return set;
}

}  // namespace

std::vector<Keypoint> detect_harris(const Image& gray, const HarrisParams& params) {
  if (gray.channels() != 1) fail(ErrorCode::InvalidArgument, "detector needs a single-channel image");
  const int w = gray.width(), h = gray.height();
  if (w < 3 || h < 3 || params.max_keypoints <= 0) return {};

  const GradientField g = gradients(gray);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<float> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = g.gx[i] * g.gx[i];
    yy[i] = g.gy[i] * g.gy[i];
    xy[i] = g.gx[i] * g.gy[i];
  }
  xx = smooth(xx, w, h, params.sigma);
  yy = smooth(yy, w, h, params.sigma);
  xy = smooth(xy, w, h, params.sigma);

  std::vector<double> response(n);
  double max_response = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = xx[i], b = yy[i], c = xy[i];
    response[i] = a * b - c * c - params.k * (a + b) * (a + b);
    max_response = std::max(max_response, response[i]);
  }
  const double threshold = std::max(params.relative_threshold * max_response, 1e-12);
  if (!(max_response > threshold)) return {};

  struct Candidate {
    int x, y;
    double score;
  };
  std::vector<Candidate> candidates;
  const int r = std::max(params.nms_radius, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = response[static_cast<std::size_t>(y) * w + x];
      if (!(v > threshold)) continue;
      bool is_max = true;
      for (int dy = -r; dy <= r && is_max; ++dy) {
        const int yn = y + dy;
        if (yn < 0 || yn >= h) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int xn = x + dx;
          if (xn < 0 || xn >= w || (dx == 0 && dy == 0)) continue;
          const double o = response[static_cast<std::size_t>(yn) * w + xn];
          // Plateaus keep the first pixel in scan order.
          if (o > v || (o == v && (dy < 0 || (dy == 0 && dx < 0)))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) candidates.push_back({x, y, v});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (candidates.size() > static_cast<std::size_t>(params.max_keypoints)) candidates.resize(params.max_keypoints);

  auto at = [&](int x, int y) { return response[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)]; };
  std::vector<Keypoint> kps;
  kps.reserve(candidates.size());
  for (const Candidate& c : candidates) {
    const double ox = (c.x > 0 && c.x < w - 1) ? quadratic_offset(at(c.x - 1, c.y), c.score, at(c.x + 1, c.y)) : 0.0;
    const double oy = (c.y > 0 && c.y < h - 1) ? quadratic_offset(at(c.x, c.y - 1), c.score, at(c.x, c.y + 1)) : 0.0;
    Keypoint kp;
    kp.x = static_cast<float>(std::clamp(c.x + ox, 0.0, w - 1.0));
    kp.y = static_cast<float>(std::clamp(c.y + oy, 0.0, h - 1.0));
    kp.score = static_cast<float>(c.score);
    kps.push_back(kp);
  }
  return kps;
}

std::vector<Keypoint> detect_harris(const Image& gray, int max_keypoints, int nms_radius) {
  HarrisParams p;
  p.max_keypoints = max_keypoints;
  p.nms_radius = nms_radius;
  return detect_harris(gray, p);
}

double estimate_orientation(const GradientField& grad, const Keypoint& kp, int radius) {
  if (radius < 1) fail(ErrorCode::InvalidArgument, "orientation radius must be positive");
  if (!(kp.x - radius >= 0 && kp.y - radius >= 0 && kp.x + radius <= grad.width - 1 && kp.y + radius <= grad.height - 1))
    fail(ErrorCode::PatchOutOfBounds, "orientation window leaves the image");

  // Soft-binned, magnitude and Gaussian weighted; bin k is centered on k * 10 degrees.
  std::array<double, kOrientationBins> hist{};
  const double sigma = radius / 2.0;
  const double bin_width = kTwoPi / kOrientationBins;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy > radius * radius) continue;
      double gx, gy;
      if (!gradient_at(grad, kp.x + dx, kp.y + dy, gx, gy)) continue;
      const double mag = std::hypot(gx, gy);
      if (!(mag > 0)) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0) angle += kTwoPi;
      const double weight = mag * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      const double pos = angle / bin_width;
      const int lo = static_cast<int>(std::floor(pos));
      const double frac = pos - lo;
      hist[lo % kOrientationBins] += weight * (1.0 - frac);
      hist[(lo + 1) % kOrientationBins] += weight * frac;
    }
  for (int pass = 0; pass < 2; ++pass) {
    std::array<double, kOrientationBins> smoothed{};
    for (int k = 0; k < kOrientationBins; ++k)
      smoothed[k] = 0.25 * hist[(k + kOrientationBins - 1) % kOrientationBins] + 0.5 * hist[k] +
                    0.25 * hist[(k + 1) % kOrientationBins];
    hist = smoothed;
  }
  int peak = 0;
  for (int k = 1; k < kOrientationBins; ++k)
    if (hist[k] > hist[peak]) peak = k;
  if (!(hist[peak] > 0)) return 0.0;
  const double left = hist[(peak + kOrientationBins - 1) % kOrientationBins];
  const double right = hist[(peak + 1) % kOrientationBins];
  double angle = (peak + quadratic_offset(left, hist[peak], right)) * bin_width;
  angle = std::fmod(angle, kTwoPi);
  if (angle < 0) angle += kTwoPi;
  if (angle >= kTwoPi) angle = 0;
  return angle;
}

double estimate_orientation(const Image& gray, const Keypoint& kp, int radius) {
  return estimate_orientation(gradients(gray), kp, radius);
}

DescriptorSet describe_vanilla(const Image& gray, const std::vector<Keypoint>& kps) {
  return describe_impl(gray, kps, HeadTag::Vanilla);
}

DescriptorSet describe_robust(const Image& gray, const std::vector<Keypoint>& kps) {
  return describe_impl(gray, kps, HeadTag::Robust);
}

DescriptorSet describe(const Image& gray, const std::vector<Keypoint>& kps, HeadTag head) {
  if (head == HeadTag::External) fail(ErrorCode::InvalidArgument, "external descriptors are loaded, not computed");
  return describe_impl(gray, kps, head);
}

std::vector<Keypoint> keypoints_with_full_support(const Image& gray, const std::vector<Keypoint>& kps) {
  // Corner of the rotated 16x16 grid, plus one pixel for the bilinear taps.
  const double margin = std::max<double>(std::hypot(patch_offset(0), patch_offset(0)), kOrientationRadius) + 1.0;
  std::vector<Keypoint> out;
  for (const Keypoint& kp : kps)
    if (kp.x >= margin && kp.y >= margin && kp.x <= gray.width() - 1 - margin && kp.y <= gray.height() - 1 - margin)
      out.push_back(kp);
  return out;
}

}  // namespace orthomatch
