#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "orthomatch/config.hpp"
#include "orthomatch/scenes.hpp"
#include "orthomatch/serialization.hpp"
#include "orthomatch/synth.hpp"

namespace orthomatch {

inline constexpr const char* kToolVersion = "orthomatch/1.0.0";
inline constexpr int kReportVersion = 1;

struct MMAConfig {
  std::vector<double> thresholds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  /// Positive and strictly ascending; throws ConfigOutOfRange.
  void validate() const;
};

struct MMAResult {
  std::vector<double> accuracy;  // one per threshold
  std::size_t matches = 0;
  bool empty = false;            // no matches; every accuracy is 0
};

/// Fraction of matches with |H_gt a - b| < tau, using the endpoints carried by
/// each match.
MMAResult mma(const MatchSet& ms, const Homographyd& h_gt, std::span<const double> thresholds);

/// Same, with endpoints looked up by index in the two keypoint lists.
MMAResult mma(const MatchSet& ms, std::span<const Keypoint> kps_a, std::span<const Keypoint> kps_b,
              const Homographyd& h_gt, std::span<const double> thresholds);

/// Angle of R_hat R_gt^T in degrees, via the trace.
double rotation_error(const Rotationd& r_hat, const Rotationd& r_gt);
double translation_error(const Vec3& t_hat, const Vec3& t_gt);

struct VPRConfig {
  double prior_radius_m = 52.0;
  double localization_radius_m = 7.0;

  /// Both positive, localization < prior; throws ConfigOutOfRange.
  void validate() const;
};

/// Per-pair records plus aggregates. `aggregate` is always a pure function of
/// (kind, records, parameters), which is checked when a report is loaded.
struct EvalReport {
  std::string kind;  // "mma", "pose" or "vpr"
  Json config;       // pipeline config echo
  Json parameters;   // protocol parameters (thresholds, radii)
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  Json records = Json::array();
  Json aggregate;
};

Json recompute_aggregate(const std::string& kind, const Json& records, const Json& parameters);

Json to_json(const EvalReport& r);
/// Throws FormatError on schema problems and InvariantError when the stored
/// aggregate differs from the one recomputed from the records.
EvalReport report_from_json(const Json& j);
EvalReport load_report(const std::filesystem::path& path);

/// Rotated-pair corpus: pipeline matches (no RANSAC) scored against H_gt.
EvalReport eval_mma(const CorpusManifest& corpus, const std::filesystem::path& corpus_dir, const PipelineConfig& cfg,
                    const MMAConfig& mma_cfg = {});

/// Every representative against each of its candidates with pose RANSAC.
/// Failed estimates are recorded and left out of the error statistics.
EvalReport eval_pose_protocol(const PoseDataset& ds, const PipelineConfig& cfg);

/// Retrieval by verified inlier count among references inside the prior.
EvalReport eval_vpr(std::span<const PlaceView> queries, std::span<const PlaceView> references, const VPRConfig& vpr,
                    const PipelineConfig& cfg);

/// MMA-vs-threshold rows ("threshold,theta,mma"; theta "all" for the mean).
std::string mma_curves_csv(const EvalReport& report);

}  // namespace orthomatch
