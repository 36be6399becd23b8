#pragma once

// Procedural textures and ray-cast renders of a textured ground plane, used by
// the synthetic benchmarks and the tests.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orthomatch/image.hpp"
#include "orthomatch/ortho_view.hpp"

namespace orthomatch {

/// Band-limited noise at two scales, stretched to [0, 1].
Image make_texture(int width, int height, std::uint64_t seed);

Image make_checkerboard(int width, int height, int square);

/// Camera-from-world pose of a camera at `eye` looking at `target`; image y
/// points along -up where possible.
Posed look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

struct RenderedView {
  Image image;
  DepthMap depth;
};

/// Ray-casts the world plane z = 0 carrying `texture` as a square of side
/// `extent_m` centered on the origin (texture x along world x, texture y
/// along world y). Pixels whose ray misses the square are black with no depth.
RenderedView render_plane_view(const Image& texture, double extent_m, const Intrinsicsd& k, int width, int height,
                               const Posed& camera_from_world);

/// One image of a pose benchmark; depth is metric and exact.
struct PoseView {
  std::string id;
  std::string sequence;
  Image image;
  DepthMap depth;
  Intrinsicsd k;
  Posed camera_from_world;
  PixelRect roi;
};

struct PoseGroup {
  std::string representative;
  std::vector<std::string> candidates;
};

struct PoseDataset {
  std::vector<PoseView> views;
  std::vector<PoseGroup> groups;

  const PoseView& view(const std::string& id) const;
};

/// A fronto-parallel representative of a textured plane and `count`
/// candidates on an arc around it: tilt up to 50 degrees and full in-plane roll.
PoseDataset make_plane_arc(std::uint64_t seed, int count = 100);

/// Image with local planar coordinates in meters, optionally carrying the
/// IPM annotation that maps it to a metric top view.
struct PlaceView {
  std::string id;
  Image image;
  Vec2 xy = Vec2::Zero();
  std::optional<OrthoSpec> ipm;
};

struct RoadCorpus {
  std::vector<PlaceView> queries;
  std::vector<PlaceView> references;
};

/// Each query views its place from the opposite driving direction (0.5 to 1.5 m
/// away); each place also has `decoys` references of other road surfaces 10 to
/// 50 m away. Places are 1 km apart.
RoadCorpus make_road_corpus(std::uint64_t seed, int queries = 20, int decoys = 5);

}  // namespace orthomatch
