#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "orthomatch/features.hpp"
#include "orthomatch/matching.hpp"
#include "orthomatch/serialization.hpp"

namespace orthomatch {

enum class HeadMode { Vanilla, Robust, Ensemble };
enum class RansacModel { None, Homography, Pose3d };

std::string_view to_string(HeadMode mode);
std::string_view to_string(RansacModel model);

struct OrthoConfig {
  bool enabled = false;
  std::optional<double> standoff_m;
  int max_side = 1024;
  int min_valid_pixels = 50;
};

/// Everything a run depends on. Serialized verbatim into reports.
///
///   {"detector": {"max_keypoints", "nms_radius", "k", "sigma", "relative_threshold"},
///    "head": "vanilla" | "robust" | "ensemble",
///    "ensemble": {"keep_fraction", "duplicate_radius_px"},
///    "ortho": {"enabled", "standoff_m" (number or null), "max_side", "min_valid_pixels"},
///    "ransac": {"model": "none" | "homography" | "pose3d", "threshold_px", "threshold_m",
///               "max_iters", "confidence"},
///    "seed", "workers"}
struct PipelineConfig {
  HarrisParams detector;
  HeadMode head = HeadMode::Ensemble;
  EnsembleParams ensemble;
  OrthoConfig ortho;
  RansacModel ransac_model = RansacModel::Homography;
  RansacParams ransac;  // ransac.seed mirrors `seed`
  std::uint64_t seed = 7;
  int workers = 1;

  /// Throws ConfigOutOfRange.
  void validate() const;
  /// `workers` capped by ORTHOMATCH_THREADS when that is set.
  int effective_workers() const;
};

Json to_json(const PipelineConfig& cfg);

/// Missing keys keep their defaults; unknown keys and wrong types are
/// ConfigError, out-of-range values ConfigOutOfRange.
PipelineConfig config_from_json(const Json& j);

PipelineConfig load_config(const std::filesystem::path& path);

/// "section.key=value"; the value is parsed as JSON, falling back to a string.
void apply_override(PipelineConfig& cfg, std::string_view assignment);

}  // namespace orthomatch
