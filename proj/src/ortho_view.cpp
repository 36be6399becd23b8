#include "orthomatch/ortho_view.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace orthomatch {

PlaneFit fit_plane(std::span<const Vec3> points) {
  if (points.size() < 3) fail(ErrorCode::DegeneratePoints, "plane fit needs at least 3 points");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= double(points.size());
  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : points) scatter += (p - centroid) * (p - centroid).transpose();
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 ev = eig.eigenvalues().cwiseMax(0.0);  // ascending
  // Eigenvalues carry roughly eps * ev(2) of round-off, so exact lines land near 1e-16.
  if (!(ev(2) > 0) || !(ev(1) > 1e-12 * ev(2)))
    fail(ErrorCode::DegeneratePoints, "points are collinear or coincident");

  Vec3 n = eig.eigenvectors().col(0).normalized();
  if (n.dot(centroid) > 0) n = -n;
  const double d = -n.dot(centroid);
  if (!(d > 1e-12)) fail(ErrorCode::DegeneratePoints, "plane passes through the camera center");

  PlaneFit fit;
  fit.plane = Planed(UnitVector3d(n), d);
  fit.centroid = centroid;
  fit.point_count = points.size();
  double ss = 0;
  for (const Vec3& p : points) {
    const double r = n.dot(p) + d;
    ss += r * r;
  }
  fit.rms = std::sqrt(ss / double(points.size()));
  return fit;
}

Posed virtual_camera_pose(const PlaneFit& fit, double standoff) {
  if (!(standoff > 0)) fail(ErrorCode::InvalidArgument, "standoff distance must be positive");
  const Vec3 n = fit.plane.normal.vector();
  const Vec3 view = -n;  // virtual optical axis, into the plane
  const Rotationd align = align_rotation(UnitVector3d(0, 0, 1), UnitVector3d(view));

  // Spin about the optical axis so the virtual x-axis follows the original
  // x-axis projected onto the plane.
  const Vec3 xa = align * Vec3::UnitX();
  const Vec3 ya = align * Vec3::UnitY();
  const Vec3 proj = Vec3::UnitX() - Vec3::UnitX().dot(view) * view;
  double phi = 0;
  if (proj.norm() > 1e-9) phi = std::atan2(proj.dot(ya), proj.dot(xa));
  const Rotationd axes = align * Rotationd::about_axis(Vec3::UnitZ(), phi);

  const Vec3 center = fit.centroid + standoff * n;
  Posed pose;
  pose.rotation = axes.transpose();
  pose.translation = -(pose.rotation * center);
  return pose;
}

std::pair<WarpResult, OrthoSpec> ortho_from_depth(const Image& img, const DepthMap& depth, const Intrinsicsd& k,
                                                  const Roi& roi, const OrthoOptions& options) {
  if (depth.width() != img.width() || depth.height() != img.height())
    fail(ErrorCode::DimensionMismatch, "depth map and image sizes differ");
  if (roi.rect.empty() || !roi.rect.within(img.width(), img.height()))
    fail(ErrorCode::EmptyROI, "ROI is empty or outside the image");
  if (!roi.mask.empty() && roi.mask.size() != static_cast<std::size_t>(img.width()) * img.height())
    fail(ErrorCode::DimensionMismatch, "ROI mask size differs from image size");

  std::vector<Vec3> points;
  std::vector<Vec2> pixels;
  for (int v = roi.rect.y0; v < roi.rect.y1; ++v)
    for (int u = roi.rect.x0; u < roi.rect.x1; ++u) {
      if (!roi.contains(u, v, img.width()) || !depth.valid(u, v)) continue;
      points.push_back(static_cast<double>(depth.depth(u, v)) * k.ray(u, v));
      pixels.emplace_back(u, v);
    }
  if (points.size() < options.min_valid_pixels)
    fail(ErrorCode::EmptyROI, "ROI has " + std::to_string(points.size()) + " valid depth pixels, need " +
                                  std::to_string(options.min_valid_pixels));

  const PlaneFit fit = fit_plane(points);
  const double standoff = options.standoff_m.value_or(fit.plane.d);
  const Posed virt = virtual_camera_pose(fit, standoff);
  const Homographyd h = rectifying_homography(k, virt.rotation, virt.translation, fit.plane);

  // Footprint of the supported ROI pixels in the virtual view.
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  for (const Vec2& p : pixels) {
    const Vec3 q = h.matrix() * p.homogeneous();
    if (!(q.z() > 1e-12)) fail(ErrorCode::DegenerateHomography, "ROI point maps behind the virtual camera");
    const Vec2 r = q.head<2>() / q.z();
    min_x = std::min(min_x, r.x()), max_x = std::max(max_x, r.x());
    min_y = std::min(min_y, r.y()), max_y = std::max(max_y, r.y());
  }
  const double span_w = max_x - min_x + 1.0, span_h = max_y - min_y + 1.0;
  const double scale = std::min(1.0, double(options.max_side) / std::max(span_w, span_h));

  OrthoSpec spec;
  spec.mode = OrthoMode::SurfaceNormal;
  spec.h_ortho = compose(Homographyd::scaling(scale, scale),
                         compose(Homographyd::translation(-min_x, -min_y), h));
  spec.out_w = std::clamp(static_cast<int>(std::ceil(span_w * scale - 1e-6)), 1, options.max_side);
  spec.out_h = std::clamp(static_cast<int>(std::ceil(span_h * scale - 1e-6)), 1, options.max_side);
  spec.plane = fit;

  WarpResult warped = apply_ortho(img, spec);
  return {std::move(warped), std::move(spec)};
}

OrthoSpec ipm_from_annotations(std::span<const PointPaird> pairs, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) fail(ErrorCode::InvalidArgument, "IPM output size must be positive");
  OrthoSpec spec;
  spec.mode = OrthoMode::Ipm;
  spec.h_ortho = homography_from_point_pairs<double>(pairs);
  spec.out_w = out_w;
  spec.out_h = out_h;
  spec.pairs.assign(pairs.begin(), pairs.end());
  return spec;
}

WarpResult apply_ortho(const Image& img, const OrthoSpec& spec) {
  return warp(img, spec.h_ortho, spec.out_w, spec.out_h);
}

BackprojectedMatches backproject_matches(const MatchSet& ms, const OrthoSpec& spec_a, const OrthoSpec& spec_b) {
  const Homographyd inv_a = invert(spec_a.h_ortho);
  const Homographyd inv_b = invert(spec_b.h_ortho);
  BackprojectedMatches out;
  out.matches.set_a = ms.set_a;
  out.matches.set_b = ms.set_b;
  for (const Match& m : ms.matches) {
    try {
      Match mapped = m;
      mapped.point_a = apply_homography(inv_a, m.point_a);
      mapped.point_b = apply_homography(inv_b, m.point_b);
      out.matches.matches.push_back(mapped);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PointAtInfinity) throw;
      ++out.dropped;
    }
  }
  return out;
}

}  // namespace orthomatch
