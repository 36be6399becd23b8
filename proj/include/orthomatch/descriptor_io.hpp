#pragma once

#include <filesystem>
#include <optional>

#include "orthomatch/features.hpp"
#include "orthomatch/image_io.hpp"

namespace orthomatch {

// OMDS exchange format, little-endian:
//   "OMDS" | u32 version = 1 | u32 N | u32 D | N x [f32 x, y, score, orientation, f32 x D]

struct LoadedDescriptors {
  DescriptorSet set;
  /// Largest |norm - 1| seen before renormalization.
  double max_norm_deviation = 0;
  /// True when some vector was off unit length by more than 1e-3.
  bool renormalized_beyond_tolerance = false;
};

void save_descriptors(const std::filesystem::path& path, const DescriptorSet& set);

/// Vectors off unit length by more than 1e-6 are renormalized. When `bounds`
/// is given, keypoints must lie within [0, w-1] x [0, h-1].
LoadedDescriptors load_external_descriptors(const std::filesystem::path& path,
                                            std::optional<ImageSize> bounds = std::nullopt);

}  // namespace orthomatch
