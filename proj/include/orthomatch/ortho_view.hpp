#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "orthomatch/image.hpp"
#include "orthomatch/matching.hpp"

namespace orthomatch {

/// Rectangle, optionally refined by a per-pixel mask of the full image size.
struct Roi {
  PixelRect rect;
  std::vector<std::uint8_t> mask;

  bool contains(int x, int y, int image_width) const {
    if (x < rect.x0 || y < rect.y0 || x >= rect.x1 || y >= rect.y1) return false;
    return mask.empty() || mask[static_cast<std::size_t>(y) * image_width + x] != 0;
  }
};

struct PlaneFit {
  Planed plane;
  double rms = 0;
  Vec3 centroid = Vec3::Zero();
  std::size_t point_count = 0;
};

/// Total least squares plane with the normal facing the camera (n.c < 0).
PlaneFit fit_plane(std::span<const Vec3> points);

enum class OrthoMode { SurfaceNormal, Ipm };

struct OrthoSpec {
  OrthoMode mode = OrthoMode::SurfaceNormal;
  Homographyd h_ortho;
  int out_w = 0;
  int out_h = 0;
  std::optional<PlaneFit> plane;   // surface-normal mode
  std::vector<PointPaird> pairs;   // ipm mode
};

struct OrthoOptions {
  /// Virtual camera distance from the plane; defaults to the fitted distance.
  std::optional<double> standoff_m;
  int max_side = 1024;
  std::size_t min_valid_pixels = 50;
};

/// Virtual-camera pose looking along -n from `standoff` above the centroid.
/// The in-plane gauge aligns the virtual x-axis with the original camera's
/// x-axis projected onto the plane. Returned pose maps original-camera
/// coordinates into virtual-camera coordinates.
Posed virtual_camera_pose(const PlaneFit& fit, double standoff);

/// Rectifies the ROI's dominant plane: the output is the virtual camera's
/// view cropped to the ROI's footprint (scaled down to `max_side` if needed).
std::pair<WarpResult, OrthoSpec> ortho_from_depth(const Image& img, const DepthMap& depth, const Intrinsicsd& k,
                                                  const Roi& roi, const OrthoOptions& options = {});

OrthoSpec ipm_from_annotations(std::span<const PointPaird> pairs, int out_w, int out_h);

/// Re-renders an ortho view from its spec alone.
WarpResult apply_ortho(const Image& img, const OrthoSpec& spec);

struct BackprojectedMatches {
  MatchSet matches;
  std::size_t dropped = 0;
};

/// Maps match endpoints from ortho coordinates back into each perspective image.
BackprojectedMatches backproject_matches(const MatchSet& ms, const OrthoSpec& spec_a, const OrthoSpec& spec_b);

}  // namespace orthomatch
