#include "orthomatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "orthomatch/image_io.hpp"
#include "orthomatch/random.hpp"
#include "orthomatch/serialization.hpp"

namespace orthomatch {

void SynthConfig::validate() const {
  if (crop_size < 16) fail(ErrorCode::ConfigOutOfRange, "crop_size must be at least 16");
  if (!(rotation_step_deg > 0 && rotation_step_deg <= 360))
    fail(ErrorCode::ConfigOutOfRange, "rotation_step_deg must lie in (0, 360]");
  const double bins = 360.0 / rotation_step_deg;
  if (std::abs(bins - std::round(bins)) > 1e-9)
    fail(ErrorCode::ConfigOutOfRange, "rotation_step_deg must divide 360");
  if (!(scale_min >= 0.7 && scale_max <= 1.4 && scale_min <= scale_max))
    fail(ErrorCode::ConfigOutOfRange, "scale range must lie within [0.7, 1.4]");
  if (!(shear_max >= 0 && shear_max <= 0.15)) fail(ErrorCode::ConfigOutOfRange, "shear_max must lie in [0, 0.15]");
  if (!(perspective_max >= 0 && perspective_max <= 1e-4))
    fail(ErrorCode::ConfigOutOfRange, "perspective_max must lie in [0, 1e-4]");
  if (!(noise_sigma >= 0 && noise_sigma <= 0.5)) fail(ErrorCode::ConfigOutOfRange, "noise_sigma must lie in [0, 0.5]");
  if (pairs_per_image < 1) fail(ErrorCode::ConfigOutOfRange, "pairs_per_image must be >= 1");
}

int SynthConfig::rotation_bins() const { return static_cast<int>(std::lround(360.0 / rotation_step_deg)); }

TransformParams sample_homography(std::uint64_t seed, const SynthConfig& config, std::optional<int> sweep_index) {
  config.validate();
  Rng rng(seed);
  const int bins = config.rotation_bins();
  // Every draw happens regardless of the ranges so the sequence never shifts.
  const int drawn_bin = static_cast<int>(rng.index(static_cast<std::uint64_t>(bins)));
  TransformParams t;
  const int bin = sweep_index ? (*sweep_index % bins + bins) % bins : drawn_bin;
  t.theta_deg = bin * config.rotation_step_deg;
  t.scale = rng.uniform(config.scale_min, config.scale_max);
  t.shear = rng.uniform(-config.shear_max, config.shear_max);
  t.perspective_x = rng.uniform(-config.perspective_max, config.perspective_max);
  t.perspective_y = rng.uniform(-config.perspective_max, config.perspective_max);
  return t;
}

Homographyd transform_homography(const TransformParams& t, const Vec2& center) {
  const Mat3 to_center = Homographyd::translation(-center.x(), -center.y()).matrix();
  const Mat3 from_center = Homographyd::translation(center.x(), center.y()).matrix();
  Mat3 scale = Mat3::Identity();
  scale(0, 0) = scale(1, 1) = t.scale;
  Mat3 shear = Mat3::Identity();
  shear(0, 1) = t.shear;
  Mat3 persp = Mat3::Identity();
  persp(2, 0) = t.perspective_x;
  persp(2, 1) = t.perspective_y;
  const Mat3 local = persp * shear * scale;
  const Homographyd jitter = Homographyd::from_matrix(from_center * local * to_center);
  return compose(rotation_homography(t.theta_deg, center), jitter);
}

Homographyd pair_homography(const PairSpec& spec) {
  const Vec2 center((spec.crop.width() - 1) / 2.0, (spec.crop.height() - 1) / 2.0);
  return compose(Homographyd::translation(spec.canvas_offset.x(), spec.canvas_offset.y()),
                 transform_homography(spec.transform, center));
}

namespace {

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-6 ? r : v;
}

Image crop_image(const Image& src, const PixelRect& r) {
  Image out(r.width(), r.height(), src.channels());
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x)
      for (int c = 0; c < src.channels(); ++c) out.at(x, y, c) = src.at(r.x0 + x, r.y0 + y, c);
  return out;
}

}  // namespace

GeneratedPair generate_pair(const Image& src, const PairSpec& spec_in, double noise_sigma) {
  const PixelRect& crop = spec_in.crop;
  if (crop.empty() || !crop.within(src.width(), src.height()))
    fail(ErrorCode::InvalidArgument, "crop rectangle outside the source image");
  GeneratedPair out;
  out.spec = spec_in;
  out.first = crop_image(src, crop);

  const Vec2 center((crop.width() - 1) / 2.0, (crop.height() - 1) / 2.0);
  const Homographyd local = transform_homography(spec_in.transform, center);
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  for (const Vec2& corner : {Vec2(0, 0), Vec2(crop.width() - 1, 0), Vec2(crop.width() - 1, crop.height() - 1),
                             Vec2(0, crop.height() - 1)}) {
    const Vec2 p = apply_homography(local, corner);
    min_x = std::min(min_x, snap(p.x())), max_x = std::max(max_x, snap(p.x()));
    min_y = std::min(min_y, snap(p.y())), max_y = std::max(max_y, snap(p.y()));
  }
  out.spec.canvas_offset = Vec2(-std::floor(min_x), -std::floor(min_y));
  out.spec.canvas_w = static_cast<int>(std::ceil(max_x + out.spec.canvas_offset.x())) + 1;
  out.spec.canvas_h = static_cast<int>(std::ceil(max_y + out.spec.canvas_offset.y())) + 1;
  if (out.spec.canvas_w > 8192 || out.spec.canvas_h > 8192)
    fail(ErrorCode::ConfigOutOfRange, "warped canvas exceeds 8192 pixels");
  out.spec.h_gt = pair_homography(out.spec);

  WarpResult warped = warp(out.first, out.spec.h_gt, out.spec.canvas_w, out.spec.canvas_h);
  out.second = std::move(warped.image);
  if (noise_sigma > 0) {
    Rng rng(derive_seed(spec_in.seed, 0x6e6f697365ull));
    for (float& v : out.second.data()) v = static_cast<float>(std::clamp(v + noise_sigma * rng.normal(), 0.0, 1.0));
  }
  return out;
}

CorpusManifest build_corpus(const std::filesystem::path& images_dir, const std::filesystem::path& out_dir,
                            const SynthConfig& config, std::uint64_t seed) {
  namespace fs = std::filesystem;
  config.validate();
  if (!fs::is_directory(images_dir)) fail(ErrorCode::IOError, images_dir.string() + " is not a directory");
  std::vector<fs::path> sources;
  for (const auto& e : fs::directory_iterator(images_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") sources.push_back(e.path());
  std::sort(sources.begin(), sources.end());
  if (sources.empty()) fail(ErrorCode::EmptyInputDir, "no PNG images in " + images_dir.string());
  fs::create_directories(out_dir);

  CorpusManifest manifest;
  manifest.generator = kGeneratorVersion;
  manifest.seed = seed;
  manifest.config = config;
  std::uint64_t pair_index = 0;
  for (const fs::path& path : sources) {
    const Image src = read_png(path);
    const std::string stem = path.stem().string();
    const int cw = std::min(config.crop_size, src.width());
    const int ch = std::min(config.crop_size, src.height());
    for (int k = 0; k < config.pairs_per_image; ++k, ++pair_index) {
      PairSpec spec;
      spec.source_id = path.filename().string();
      spec.seed = derive_seed(seed, pair_index);
      spec.transform = sample_homography(spec.seed, config, config.rotation_sweep ? std::optional<int>(k) : std::nullopt);
      Rng crop_rng(derive_seed(spec.seed, 0x63726f70ull));
      const int x0 = static_cast<int>(crop_rng.index(static_cast<std::uint64_t>(src.width() - cw + 1)));
      const int y0 = static_cast<int>(crop_rng.index(static_cast<std::uint64_t>(src.height() - ch + 1)));
      spec.crop = {x0, y0, x0 + cw, y0 + ch};

      const GeneratedPair pair = generate_pair(src, spec, config.noise_sigma);
      char name[32];
      std::snprintf(name, sizeof(name), "_%03d", k);
      CorpusEntry entry;
      entry.id = stem + name;
      entry.image_a = entry.id + "_a.png";
      entry.image_b = entry.id + "_b.png";
      entry.spec = pair.spec;
      write_png(out_dir / entry.image_a, pair.first);
      write_png(out_dir / entry.image_b, pair.second);
      manifest.entries.push_back(std::move(entry));
    }
  }
  write_text_file(out_dir / "manifest.json", dump_json(to_json(manifest)));
  return manifest;
}

}  // namespace orthomatch
