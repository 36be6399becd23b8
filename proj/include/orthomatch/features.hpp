#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "orthomatch/image.hpp"

namespace orthomatch {

struct Keypoint {
  float x = 0, y = 0;
  float score = 0;
  float orientation = 0;  // radians in [0, 2pi); 0 when unoriented

  bool operator==(const Keypoint&) const = default;
};

enum class HeadTag { Vanilla = 0, Robust = 1, External = 2 };

std::string_view to_string(HeadTag head);
HeadTag head_from_string(std::string_view name);

inline constexpr int kDescriptorDim = 128;
inline constexpr int kPatchSize = 16;
inline constexpr int kOrientationRadius = 8;
inline constexpr int kOrientationBins = 36;

/// Keypoints with one L2-normalized descriptor column each (D x N).
struct DescriptorSet {
  std::vector<Keypoint> keypoints;
  Eigen::MatrixXf vectors;
  HeadTag head = HeadTag::Vanilla;
  std::string id;

  std::size_t size() const { return keypoints.size(); }
  int dimension() const { return static_cast<int>(vectors.rows()); }
  bool empty() const { return keypoints.empty(); }

  /// Count alignment and unit norm (1e-6); throws InvariantError.
  void validate() const;
};

struct HarrisParams {
  int max_keypoints = 1000;
  int nms_radius = 3;
  double k = 0.04;
  double sigma = 1.0;
  /// Optional cut relative to the image maximum. Off by default: warped
  /// canvases have strong border responses that would mask the interior.
  double relative_threshold = 0.0;
};

/// Harris corners with square non-maximum suppression and quadratic subpixel
/// refinement. Ordered by score (desc), then (y, x) ascending.
std::vector<Keypoint> detect_harris(const Image& gray, const HarrisParams& params);
std::vector<Keypoint> detect_harris(const Image& gray, int max_keypoints, int nms_radius);

/// Dominant gradient direction in a disk around the keypoint. Returns radians
/// in [0, 2pi); throws PatchOutOfBounds if the disk leaves the image.
double estimate_orientation(const GradientField& grad, const Keypoint& kp, int radius = kOrientationRadius);
double estimate_orientation(const Image& gray, const Keypoint& kp, int radius = kOrientationRadius);

/// Axis-aligned 16x16 bias-gain normalized patch pooled to 8x8.
DescriptorSet describe_vanilla(const Image& gray, const std::vector<Keypoint>& kps);

/// Same sampling in the frame rotated by each keypoint's estimated orientation.
DescriptorSet describe_robust(const Image& gray, const std::vector<Keypoint>& kps);

DescriptorSet describe(const Image& gray, const std::vector<Keypoint>& kps, HeadTag head);

/// Keeps keypoints whose rotated patch and orientation disk fit in the image,
/// so both heads describe the same keypoint list.
std::vector<Keypoint> keypoints_with_full_support(const Image& gray, const std::vector<Keypoint>& kps);

}  // namespace orthomatch
