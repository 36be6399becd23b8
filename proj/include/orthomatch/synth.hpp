#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "orthomatch/image.hpp"

namespace orthomatch {

/// Rotated/warped pair generation. Magnitudes are bounded: scale within
/// [0.7, 1.4], |shear| <= 0.15, |perspective| <= 1e-4 per pixel.
struct SynthConfig {
  int crop_size = 400;
  double rotation_step_deg = 15.0;
  /// Pair k of an image takes rotation bin k (mod bins) instead of a random one.
  bool rotation_sweep = false;
  double scale_min = 1.0;
  double scale_max = 1.0;
  double shear_max = 0.0;
  double perspective_max = 0.0;
  double noise_sigma = 0.0;
  int pairs_per_image = 8;

  /// Throws ConfigOutOfRange.
  void validate() const;
  int rotation_bins() const;
};

/// Primitive factors of a pair's homography, applied about the crop center in
/// the order scale, shear, perspective, rotation.
struct TransformParams {
  double theta_deg = 0;
  double scale = 1;
  double shear = 0;
  double perspective_x = 0;
  double perspective_y = 0;
};

struct PairSpec {
  std::string source_id;
  PixelRect crop;
  TransformParams transform;
  /// Translation placing the warped crop's bounding box at the canvas origin.
  Vec2 canvas_offset = Vec2::Zero();
  int canvas_w = 0;
  int canvas_h = 0;
  Homographyd h_gt;
  std::uint64_t seed = 0;
};

/// Draws theta from {0, step, ..., 360 - step} and the jitter factors
/// uniformly from their ranges. `sweep_index` forces the rotation bin.
TransformParams sample_homography(std::uint64_t seed, const SynthConfig& config,
                                  std::optional<int> sweep_index = std::nullopt);

/// Composite map R(theta) * P * Sh * S, every factor centered on `center`.
Homographyd transform_homography(const TransformParams& t, const Vec2& center);

/// H_gt rebuilt from the stored primitives: T(canvas_offset) * transform.
Homographyd pair_homography(const PairSpec& spec);

struct GeneratedPair {
  Image first;
  Image second;
  PairSpec spec;  // canvas and h_gt filled in
};

/// I1 = crop, I2 = I1 warped by H_gt onto a canvas holding the whole warped crop.
GeneratedPair generate_pair(const Image& src, const PairSpec& spec, double noise_sigma = 0.0);

struct CorpusEntry {
  std::string id;
  std::string image_a;  // relative to the manifest directory
  std::string image_b;
  PairSpec spec;
};

struct CorpusManifest {
  int version = 1;
  std::string generator;
  std::uint64_t seed = 0;
  SynthConfig config;
  std::vector<CorpusEntry> entries;
};

/// Reads every *.png in `images_dir` (sorted by name), writes I1/I2 pairs and
/// manifest.json into `out_dir`. Pair i uses seed derive_seed(seed, i).
CorpusManifest build_corpus(const std::filesystem::path& images_dir, const std::filesystem::path& out_dir,
                            const SynthConfig& config, std::uint64_t seed);

inline constexpr const char* kGeneratorVersion = "orthomatch-synth/1";

}  // namespace orthomatch
