#include "orthomatch/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "orthomatch/random.hpp"

namespace orthomatch {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Image normalized(Image img) {
  auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  const float a = *lo, span = std::max(*hi - *lo, 1e-6f);
  for (float& v : img.data()) v = std::clamp((v - a) / span, 0.0f, 1.0f);
  return img;
}

}  // namespace

Image make_texture(int width, int height, std::uint64_t seed) {
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "texture size must be positive");
  Rng rng(seed);
  Image noise(width, height);
  // Unit-range input for the blur, which clamps.
  for (float& v : noise.data()) v = static_cast<float>(rng.uniform());
  const Image fine = normalized(gaussian_blur(noise, 1.5));
  const Image coarse = normalized(gaussian_blur(noise, 4.5));
  Image out(width, height);
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = 0.45f * fine.data()[i] + 0.55f * coarse.data()[i];
  return normalized(std::move(out));
}

Image make_checkerboard(int width, int height, int square) {
  if (width <= 0 || height <= 0 || square <= 0) fail(ErrorCode::InvalidArgument, "bad checkerboard size");
  Image out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out.at(x, y) = ((x / square + y / square) % 2) ? 1.0f : 0.0f;
  return out;
}

Posed look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 y = -(up - up.dot(z) * z);
  if (!(y.norm() > 1e-9)) fail(ErrorCode::InvalidArgument, "up vector is parallel to the viewing direction");
  y.normalize();
  const Vec3 x = y.cross(z);
  Mat3 r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  Posed pose;
  pose.rotation = Rotationd::from_matrix(r);
  pose.translation = -(r * eye);
  return pose;
}

RenderedView render_plane_view(const Image& texture, double extent_m, const Intrinsicsd& k, int width, int height,
                               const Posed& camera_from_world) {
  if (width <= 0 || height <= 0 || !(extent_m > 0)) fail(ErrorCode::InvalidArgument, "bad render parameters");
  const Mat3 rt = camera_from_world.rotation.matrix().transpose();
  const Vec3 center = -(rt * camera_from_world.translation);
  const double sx = (texture.width() - 1) / extent_m, sy = (texture.height() - 1) / extent_m;
  RenderedView out{Image(width, height, texture.channels()), DepthMap(width, height)};
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      const Vec3 ray = k.ray(u, v);  // z = 1 in camera coordinates
      const Vec3 dir = rt * ray;
      if (std::abs(dir.z()) < 1e-12) continue;
      const double lambda = -center.z() / dir.z();
      if (!(lambda > 0)) continue;
      const Vec3 p = center + lambda * dir;
      const double tx = (p.x() + extent_m / 2) * sx, ty = (p.y() + extent_m / 2) * sy;
      bool ok = true;
      for (int c = 0; c < texture.channels() && ok; ++c) {
        float value;
        ok = sample_bilinear(texture, tx, ty, c, value);
        if (ok) out.image.at(u, v, c) = value;
      }
      if (ok) out.depth.set(u, v, static_cast<float>(lambda));
    }
  return out;
}

const PoseView& PoseDataset::view(const std::string& id) const {
  for (const PoseView& v : views)
    if (v.id == id) return v;
  fail(ErrorCode::ManifestError, "unknown view id '" + id + "'");
}

PoseDataset make_plane_arc(std::uint64_t seed, int count) {
  if (count < 1) fail(ErrorCode::InvalidArgument, "arc needs at least one candidate");
  constexpr int kW = 320, kH = 240;
  constexpr double kExtent = 6.0, kDistance = 2.0;
  const Intrinsicsd k{300, 300, (kW - 1) / 2.0, (kH - 1) / 2.0};
  const Image texture = make_texture(1024, 1024, derive_seed(seed, 0));

  PoseDataset ds;
  auto add = [&](const std::string& id, const Posed& pose) {
    RenderedView r = render_plane_view(texture, kExtent, k, kW, kH, pose);
    ds.views.push_back({id, "arc", std::move(r.image), std::move(r.depth), k, pose, PixelRect{0, 0, kW, kH}});
  };
  add("rep", look_at(Vec3(0, 0, kDistance), Vec3::Zero(), Vec3::UnitY()));

  PoseGroup group{"rep", {}};
  Rng rng(derive_seed(seed, 1));
  for (int i = 0; i < count; ++i) {
    const double tilt = (count > 1 ? 50.0 * i / (count - 1) : 0.0) * kDeg;
    const double azimuth = rng.uniform(0, 2 * std::numbers::pi);
    const double roll = rng.uniform(0, 2 * std::numbers::pi);
    const Vec3 eye = kDistance * Vec3(std::sin(tilt) * std::cos(azimuth), std::sin(tilt) * std::sin(azimuth), std::cos(tilt));
    Posed pose = look_at(eye, Vec3::Zero(), Vec3::UnitY());
    const Rotationd spin = Rotationd::about_axis(Vec3::UnitZ(), roll);
    pose.rotation = spin * pose.rotation;
    pose.translation = spin * pose.translation;
    char id[16];
    std::snprintf(id, sizeof(id), "arc_%03d", i);
    add(id, pose);
    group.candidates.push_back(id);
  }
  ds.groups.push_back(std::move(group));
  return ds;
}

namespace {

constexpr double kRoadExtent = 14.0;         // texture square side, meters
constexpr int kRoadTexturePx = 840;          // 60 px/m
constexpr double kPatchW = 4.0, kPatchL = 3.0;  // IPM footprint, meters
constexpr double kIpmPxPerM = 60.0;

Image make_road_texture(std::uint64_t seed) {
  Image tex = make_texture(kRoadTexturePx, kRoadTexturePx, seed);
  // Dashed lane markings along world y; faint so texture dominates.
  const double px_per_m = (kRoadTexturePx - 1) / kRoadExtent;
  for (int y = 0; y < kRoadTexturePx; ++y) {
    const double wy = y / px_per_m - kRoadExtent / 2;
    const bool dash = std::fmod(wy + 100.0, 4.0) < 2.0;
    for (int x = 0; x < kRoadTexturePx; ++x) {
      const double wx = x / px_per_m - kRoadExtent / 2;
      if (dash && std::abs(std::abs(wx) - 1.75) < 0.06) tex.at(x, y) = std::min(1.0f, tex.at(x, y) * 0.4f + 0.6f);
    }
  }
  return tex;
}

// Dash camera behind `ground` facing `heading`, and the IPM annotation of the
// footprint rectangle around `ground` (forward is up in the top view).
PlaceView render_road_view(const std::string& id, const Image& texture, const Vec2& ground, double heading,
                          const Vec2& world_xy) {
  constexpr int kW = 320, kH = 240;
  const Intrinsicsd k{300, 300, (kW - 1) / 2.0, (kH - 1) / 2.0};
  const Vec3 fwd(std::cos(heading), std::sin(heading), 0);
  const Vec3 right(std::sin(heading), -std::cos(heading), 0);
  const Vec3 target(ground.x(), ground.y(), 0);
  const Vec3 eye = target - 2.2 * fwd + Vec3(0, 0, 1.8);
  const Posed pose = look_at(eye, target, Vec3::UnitZ());
  RenderedView r = render_plane_view(texture, kRoadExtent, k, kW, kH, pose);

  const int out_w = static_cast<int>(kPatchW * kIpmPxPerM), out_h = static_cast<int>(kPatchL * kIpmPxPerM);
  std::vector<PointPaird> pairs;
  for (auto [a, b] : {std::pair{-1, 1}, std::pair{1, 1}, std::pair{1, -1}, std::pair{-1, -1}}) {
    const Vec3 corner = target + (a * kPatchW / 2) * right + (b * kPatchL / 2) * fwd;
    const Vec3 cam = pose * corner;
    const Vec2 px = k.project(cam);
    const Vec2 top((a + 1) / 2.0 * (out_w - 1), (1 - b) / 2.0 * (out_h - 1));
    pairs.push_back({px, top});
  }
  PlaceView view;
  view.id = id;
  view.image = std::move(r.image);
  view.xy = world_xy;
  view.ipm = ipm_from_annotations(pairs, out_w, out_h);
  return view;
}

}  // namespace

RoadCorpus make_road_corpus(std::uint64_t seed, int queries, int decoys) {
  if (queries < 1 || decoys < 0) fail(ErrorCode::InvalidArgument, "bad road corpus size");
  RoadCorpus corpus;
  Rng rng(seed);
  int ref_index = 0;
  for (int q = 0; q < queries; ++q) {
    const Vec2 origin(1000.0 * q, 0.0);
    const Image texture = make_road_texture(derive_seed(seed, 100 + q));
    const double heading = rng.uniform(0, 2 * std::numbers::pi);
    const double offset_dir = rng.uniform(0, 2 * std::numbers::pi);
    const double offset = rng.uniform(0.5, 1.5);
    const Vec2 shift = offset * Vec2(std::cos(offset_dir), std::sin(offset_dir));

    char id[32];
    std::snprintf(id, sizeof(id), "ref_%03d", ref_index++);
    corpus.references.push_back(render_road_view(id, texture, Vec2::Zero(), heading, origin));
    std::snprintf(id, sizeof(id), "query_%03d", q);
    corpus.queries.push_back(render_road_view(id, texture, shift, heading + std::numbers::pi, origin + shift));

    for (int d = 0; d < decoys; ++d) {
      const Image other = make_road_texture(derive_seed(seed, 100000 + q * 64 + d));
      const double r = rng.uniform(10.0, 50.0), a = rng.uniform(0, 2 * std::numbers::pi);
      std::snprintf(id, sizeof(id), "ref_%03d", ref_index++);
      corpus.references.push_back(render_road_view(id, other, Vec2::Zero(), rng.uniform(0, 2 * std::numbers::pi),
                                                   origin + shift + r * Vec2(std::cos(a), std::sin(a))));
    }
  }
  return corpus;
}

}  // namespace orthomatch
