#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "orthomatch/config.hpp"
#include "orthomatch/ortho_view.hpp"

namespace orthomatch {

/// One side of a pair. Pointers are borrowed for the duration of the call.
struct ViewInput {
  std::string id;
  const Image* image = nullptr;
  const DepthMap* depth = nullptr;
  std::optional<Intrinsicsd> k;
  std::optional<PixelRect> roi;     // whole image when absent
  std::optional<OrthoSpec> ortho;   // precomputed (e.g. IPM); wins over depth
};

struct StageTiming {
  std::string stage;
  double ms = 0;
};

struct PipelineResult {
  /// Matches in working coordinates (the ortho views when ortho is on).
  MatchSet matches;
  /// The same matches mapped back into the input images; equals `matches`
  /// when ortho is off. Pose RANSAC flags index into this set, homography
  /// RANSAC flags into `matches`.
  MatchSet perspective_matches;
  std::optional<RansacResult> ransac;
  std::string ransac_failure;  // why RANSAC produced no model, if it did not
  std::optional<OrthoSpec> ortho_a, ortho_b;
  std::size_t keypoints_a = 0, keypoints_b = 0;
  std::vector<StageTiming> timings;

  int inlier_count() const { return ransac ? ransac->inlier_count : 0; }
};

/// ortho (optional) -> detect -> describe per head -> MNN -> ensemble
/// (optional) -> RANSAC -> back-projection. Errors are rethrown with the pair
/// and stage named; running out of matches in RANSAC is recorded, not thrown.
PipelineResult run_pipeline(const ViewInput& a, const ViewInput& b, const PipelineConfig& cfg);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// handled exactly once; callers store results by index.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace orthomatch
