#pragma once

#include <filesystem>
#include <optional>

#include "orthomatch/image.hpp"

namespace orthomatch {

/// 8- or 16-bit PNG (gray, gray+alpha, RGB, RGBA); alpha is dropped.
Image read_png(const std::filesystem::path& path);

/// Writes 8-bit gray or RGB, values rounded from [0, 1].
void write_png(const std::filesystem::path& path, const Image& img);

struct ImageSize {
  int width = 0, height = 0;
};

/// 16-bit single-channel PNG in millimeters, 0 = invalid. If `expected` is
/// given, a differently sized file is rejected.
DepthMap read_depth_png(const std::filesystem::path& path, std::optional<ImageSize> expected = std::nullopt);

/// Depths are rounded to the nearest millimeter; values beyond 65.535 m are invalid.
void write_depth_png(const std::filesystem::path& path, const DepthMap& depth);

}  // namespace orthomatch
