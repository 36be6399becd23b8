#pragma once

// Dataset manifests. Paths inside a manifest are relative to its directory.
//
// corpus (gen-rotated output, eval-mma input):
//   {"schema": "orthomatch.corpus", "version": 1, "generator", "seed", "config",
//    "pairs": [{"id", "image_a", "image_b", "h_gt": [9], "spec": {...}}]}
// pose (eval-pose):
//   {"schema": "orthomatch.pose_manifest", "version": 1,
//    "images": [{"id", "image", "depth", "k": [9], "pose": {"r": [9], "t": [3]},
//                "roi": [x0, y0, x1, y1], "sequence"}],
//    "representatives": [{"id", "candidates": [ids]}]}
//   pose is camera-from-world; depth is a 16-bit PNG in millimeters.
// places (eval-vpr queries or references):
//   {"schema": "orthomatch.place_manifest", "version": 1,
//    "images": [{"id", "image", "xy": [x, y], "ipm": {OrthoSpec}}]}
//   xy are local planar meters.

#include <filesystem>
#include <string>
#include <vector>

#include "orthomatch/scenes.hpp"
#include "orthomatch/synth.hpp"

namespace orthomatch {

enum class ManifestKind { Corpus, Pose, Places };

/// "eval-mma" and "corpus" -> Corpus, "eval-pose" -> Pose, "eval-vpr" -> Places.
ManifestKind manifest_kind_for(const std::string& command);

struct Violation {
  int index = -1;     // entry index, -1 for the top level
  std::string field;
  std::string message;
};

std::string to_string(const Violation& v);

/// Exhaustive check, including that referenced files exist. Throws IOError
/// only when the manifest itself cannot be read.
std::vector<Violation> validate_manifest(const std::filesystem::path& path, ManifestKind kind);
std::vector<Violation> validate_manifest(const std::filesystem::path& path, const std::string& command);

/// Validate, then load; any violation is a ManifestError listing them all.
CorpusManifest load_corpus_manifest(const std::filesystem::path& path);
PoseDataset load_pose_manifest(const std::filesystem::path& path);
std::vector<PlaceView> load_place_manifest(const std::filesystem::path& path);

/// Write images (and depth) next to the manifest file.
void write_pose_manifest(const std::filesystem::path& path, const PoseDataset& ds);
void write_place_manifest(const std::filesystem::path& path, const std::vector<PlaceView>& views);

}  // namespace orthomatch
