#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "orthomatch/features.hpp"
#include "orthomatch/geometry.hpp"
#include "orthomatch/image.hpp"

namespace orthomatch {

/// A correspondence between keypoint `index_a` of set A and `index_b` of set
/// B. The endpoint pixel coordinates travel with the match so sets built from
/// different heads (or remapped views) stay self-contained.
struct Match {
  int index_a = 0;
  int index_b = 0;
  double distance = 0;
  HeadTag head = HeadTag::Vanilla;
  Vec2 point_a = Vec2::Zero();
  Vec2 point_b = Vec2::Zero();
};

struct MatchSet {
  std::vector<Match> matches;
  std::string set_a;
  std::string set_b;

  std::size_t size() const { return matches.size(); }
  bool empty() const { return matches.empty(); }
};

/// Exhaustive mutual nearest neighbours under L2 distance. Ties resolve to the
/// lowest index. Either set empty gives an empty result.
MatchSet match_mnn(const DescriptorSet& a, const DescriptorSet& b);

struct EnsembleParams {
  double keep_fraction = 0.5;
  /// Matches whose endpoints both agree within this radius are duplicates.
  double duplicate_radius_px = 0.5;
};

/// Union of per-head matches, duplicates collapsed to the lower distance,
/// sorted by (distance, head, index_a) and cut to ceil(keep_fraction * M).
MatchSet ensemble(const MatchSet& vanilla, const MatchSet& robust, const EnsembleParams& params = {});

struct RansacParams {
  double threshold_px = 3.0;
  double threshold_m = 0.05;
  int max_iters = 2000;
  double confidence = 0.999;
  std::uint64_t seed = 7;
};

struct RansacResult {
  std::variant<Homographyd, Posed> model;
  std::vector<std::uint8_t> inliers;  // one flag per input correspondence
  int inlier_count = 0;
  int iterations_run = 0;

  const Homographyd& homography() const { return std::get<Homographyd>(model); }
  const Posed& pose() const { return std::get<Posed>(model); }
};

/// max(|H a - b|, |H^-1 b - a|); +inf if either side maps to infinity.
double symmetric_transfer_error(const Homographyd& h, const Vec2& a, const Vec2& b);

/// 4-point DLT hypotheses, adaptive termination, DLT refit on the inliers.
RansacResult ransac_homography(std::span<const PointPaird> pairs, const RansacParams& params);
RansacResult ransac_homography(const MatchSet& ms, const RansacParams& params);

struct Point3Pair {
  Vec3 a;
  Vec3 b;
};

/// Least-squares rigid transform b ~ R a + t (Kabsch with reflection guard).
Posed rigid_transform(std::span<const Point3Pair> pairs);

/// 3-point Procrustes hypotheses on 3D-3D pairs; pose maps frame A to frame B.
RansacResult ransac_pose_3d(std::span<const Point3Pair> pairs, const RansacParams& params);

/// Back-projects both endpoints with their depth maps; matches lacking valid
/// depth at either end are never inliers.
RansacResult ransac_pose_3d(const MatchSet& ms, const DepthMap& depth_a, const DepthMap& depth_b,
                            const Intrinsicsd& k_a, const Intrinsicsd& k_b, const RansacParams& params);

}  // namespace orthomatch
