// orthomatch command-line driver.
//
// Exit codes: 0 success, 1 validation error (bad arguments, config or
// manifest), 2 runtime failure.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "orthomatch/config.hpp"
#include "orthomatch/descriptor_io.hpp"
#include "orthomatch/evaluation.hpp"
#include "orthomatch/image_io.hpp"
#include "orthomatch/manifest.hpp"
#include "orthomatch/pipeline.hpp"
#include "orthomatch/random.hpp"
#include "orthomatch/scenes.hpp"
#include "orthomatch/serialization.hpp"
#include "orthomatch/synth.hpp"

namespace om = orthomatch;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

bool is_validation(om::ErrorCode c) {
  switch (c) {
    case om::ErrorCode::ConfigError:
    case om::ErrorCode::ConfigOutOfRange:
    case om::ErrorCode::ManifestError:
    case om::ErrorCode::FormatError:
    case om::ErrorCode::InvariantError:
    case om::ErrorCode::InvalidArgument:
    case om::ErrorCode::DimensionMismatch:
    case om::ErrorCode::EmptyInputDir:
      return true;
    default:
      return false;
  }
}

// Options shared by the commands that run the pipeline.
struct PipelineOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string head;

  void attach(CLI::App* cmd, bool with_head = true) {
    cmd->add_option("--config", config_path, "pipeline config JSON")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "config override, e.g. ransac.threshold_px=2")->take_all();
    cmd->add_option("--seed", seed, "seed");
    cmd->add_option("--workers", workers, "parallel workers (capped by ORTHOMATCH_THREADS)");
    if (with_head) cmd->add_option("--head", head, "descriptor head")->check(CLI::IsMember({"vanilla", "robust", "ensemble"}));
  }

  om::PipelineConfig build() const {
    om::PipelineConfig cfg = config_path.empty() ? om::PipelineConfig{} : om::load_config(config_path);
    for (const std::string& o : overrides) om::apply_override(cfg, o);
    if (!head.empty()) om::apply_override(cfg, "head=\"" + head + "\"");
    if (seed) om::apply_override(cfg, "seed=" + std::to_string(*seed));
    if (workers) om::apply_override(cfg, "workers=" + std::to_string(*workers));
    return cfg;
  }
};

void write_json(const fs::path& out, const om::Json& j) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  om::write_text_file(out, om::dump_json(j));
}

om::PixelRect parse_roi(const std::string& s) {
  om::PixelRect r;
  if (std::sscanf(s.c_str(), "%d,%d,%d,%d", &r.x0, &r.y0, &r.x1, &r.y1) != 4 || r.empty())
    om::fail(om::ErrorCode::InvalidArgument, "roi must be x0,y0,x1,y1 with x0 < x1 and y0 < y1");
  return r;
}

class Timer {
 public:
  explicit Timer(std::string what) : what_(std::move(what)), start_(std::chrono::steady_clock::now()) {}
  ~Timer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::cerr << "[time] " << what_ << ": " << s << " s\n";
  }

 private:
  std::string what_;
  std::chrono::steady_clock::time_point start_;
};

void print_aggregate(const om::EvalReport& r) { std::cout << om::dump_json(r.aggregate); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotation-robust local feature matching with orthographic rectification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", om::kToolVersion);

  // gen-rotated
  auto* gen = app.add_subcommand("gen-rotated", "build a rotated-pair corpus from a directory of PNGs");
  std::string gen_in, gen_out;
  std::uint64_t gen_seed = 42;
  om::SynthConfig synth;
  gen->add_option("--in", gen_in, "source image directory")->required();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--pairs-per-image", synth.pairs_per_image);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--rot-step", synth.rotation_step_deg, "rotation step in degrees");
  gen->add_flag("--sweep", synth.rotation_sweep, "pair k of each image takes rotation bin k");
  gen->add_option("--crop", synth.crop_size);
  gen->add_option("--scale-min", synth.scale_min);
  gen->add_option("--scale-max", synth.scale_max);
  gen->add_option("--shear-max", synth.shear_max);
  gen->add_option("--perspective-max", synth.perspective_max);
  gen->add_option("--noise", synth.noise_sigma);

  // describe
  auto* desc = app.add_subcommand("describe", "detect keypoints and write an OMDS descriptor file");
  std::string desc_head = "robust", desc_in, desc_out;
  om::HarrisParams harris;
  harris.max_keypoints = 2000;
  desc->add_option("--head", desc_head)->check(CLI::IsMember({"vanilla", "robust"}));
  desc->add_option("--max-kp", harris.max_keypoints);
  desc->add_option("--nms", harris.nms_radius);
  desc->add_option("--in", desc_in)->required()->check(CLI::ExistingFile);
  desc->add_option("--out", desc_out)->required();

  // match
  auto* match = app.add_subcommand("match", "mutual nearest neighbours, optional ensemble and RANSAC");
  std::string m_a, m_b, m_out, m_ransac = "none", m_depth_a, m_depth_b, m_k_a, m_k_b;
  std::vector<std::string> m_ens;
  std::uint64_t m_seed = 7;
  om::RansacParams m_params;
  om::EnsembleParams m_ens_params;
  match->add_option("--a", m_a)->required()->check(CLI::ExistingFile);
  match->add_option("--b", m_b)->required()->check(CLI::ExistingFile);
  match->add_option("--ensemble", m_ens, "second-head descriptor files for A and B")
      ->expected(2)
      ->check(CLI::ExistingFile);
  match->add_option("--keep-fraction", m_ens_params.keep_fraction);
  match->add_option("--ransac", m_ransac)->check(CLI::IsMember({"none", "homography", "pose3d"}));
  match->add_option("--threshold-px", m_params.threshold_px);
  match->add_option("--threshold-m", m_params.threshold_m);
  match->add_option("--max-iters", m_params.max_iters);
  match->add_option("--seed", m_seed);
  match->add_option("--depth-a", m_depth_a)->check(CLI::ExistingFile);
  match->add_option("--depth-b", m_depth_b)->check(CLI::ExistingFile);
  match->add_option("--k-a", m_k_a)->check(CLI::ExistingFile);
  match->add_option("--k-b", m_k_b)->check(CLI::ExistingFile);
  match->add_option("--out", m_out)->required();

  // ortho
  auto* ortho = app.add_subcommand("ortho", "render an orthographic view from depth or IPM annotations");
  std::string o_mode = "depth", o_img, o_depth, o_k, o_roi, o_pairs, o_out, o_spec;
  om::OrthoOptions o_opt;
  std::optional<double> o_standoff;
  ortho->add_option("--mode", o_mode)->check(CLI::IsMember({"depth", "ipm"}));
  ortho->add_option("--img", o_img)->required()->check(CLI::ExistingFile);
  ortho->add_option("--depth", o_depth)->check(CLI::ExistingFile);
  ortho->add_option("--k", o_k)->check(CLI::ExistingFile);
  ortho->add_option("--roi", o_roi, "x0,y0,x1,y1 (default: whole image)");
  ortho->add_option("--pairs", o_pairs, "IPM annotation JSON {pairs, out_w, out_h}")->check(CLI::ExistingFile);
  ortho->add_option("--standoff", o_standoff);
  ortho->add_option("--max-side", o_opt.max_side);
  ortho->add_option("--out", o_out)->required();
  ortho->add_option("--spec", o_spec)->required();

  // eval-mma
  auto* emma = app.add_subcommand("eval-mma", "mean matching accuracy over a rotated-pair corpus");
  std::string mma_corpus, mma_out;
  PipelineOptions mma_opts;
  om::MMAConfig mma_cfg;
  emma->add_option("--corpus", mma_corpus)->required()->check(CLI::ExistingFile);
  emma->add_option("--thresholds", mma_cfg.thresholds);
  emma->add_option("--out", mma_out)->required();
  mma_opts.attach(emma);

  // eval-pose
  auto* epose = app.add_subcommand("eval-pose", "relative pose error of representative/candidate pairs");
  std::string pose_manifest, pose_out, pose_ortho;
  PipelineOptions pose_opts;
  epose->add_option("--manifest", pose_manifest)->required()->check(CLI::ExistingFile);
  epose->add_option("--ortho", pose_ortho)->check(CLI::IsMember({"on", "off"}));
  epose->add_option("--out", pose_out)->required();
  pose_opts.attach(epose);

  // eval-vpr
  auto* evpr = app.add_subcommand("eval-vpr", "place recognition recall with a positional prior");
  std::string vpr_q, vpr_r, vpr_out, vpr_ortho;
  om::VPRConfig vpr_cfg;
  PipelineOptions vpr_opts;
  evpr->add_option("--queries", vpr_q)->required()->check(CLI::ExistingFile);
  evpr->add_option("--refs", vpr_r)->required()->check(CLI::ExistingFile);
  evpr->add_option("--prior-m", vpr_cfg.prior_radius_m);
  evpr->add_option("--loc-m", vpr_cfg.localization_radius_m);
  evpr->add_option("--ortho", vpr_ortho, "use the manifests' IPM annotations")->check(CLI::IsMember({"on", "off"}));
  evpr->add_option("--out", vpr_out)->required();
  vpr_opts.attach(evpr);

  // report
  auto* rep = app.add_subcommand("report", "check a report and print its aggregates");
  std::string rep_in, rep_csv;
  rep->add_option("--in", rep_in)->required()->check(CLI::ExistingFile);
  rep->add_option("--csv", rep_csv, "write MMA-vs-threshold curves");

  // validate
  auto* val = app.add_subcommand("validate", "check a manifest against the schema of a command");
  std::string val_path, val_cmd = "eval-mma";
  val->add_option("--manifest", val_path)->required();
  val->add_option("--command", val_cmd)->check(CLI::IsMember({"eval-mma", "eval-pose", "eval-vpr"}));

  // make-scene
  auto* scene = app.add_subcommand("make-scene", "write a synthetic benchmark (plane arc or road places)");
  std::string scene_kind = "arc", scene_out;
  std::uint64_t scene_seed = 1;
  int scene_count = 0;
  scene->add_option("--kind", scene_kind)->check(CLI::IsMember({"arc", "road", "textures"}));
  scene->add_option("--out", scene_out)->required();
  scene->add_option("--seed", scene_seed);
  scene->add_option("--count", scene_count, "candidates (arc), queries (road) or images (textures)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen) {
      Timer t("gen-rotated");
      const om::CorpusManifest m = om::build_corpus(gen_in, gen_out, synth, gen_seed);
      std::cout << m.entries.size() << " pairs written to " << gen_out << "\n";
    } else if (*desc) {
      const om::Image gray = om::grayscale(om::read_png(desc_in));
      const auto kps = om::keypoints_with_full_support(gray, om::detect_harris(gray, harris));
      om::DescriptorSet set = om::describe(gray, kps, om::head_from_string(desc_head));
      set.id = fs::path(desc_in).filename().string();
      om::save_descriptors(desc_out, set);
      std::cout << set.size() << " descriptors written to " << desc_out << "\n";
    } else if (*match) {
      auto load = [](const std::string& p) {
        om::DescriptorSet s = om::load_external_descriptors(p).set;
        s.id = fs::path(p).filename().string();
        return s;
      };
      const om::DescriptorSet a = load(m_a), b = load(m_b);
      om::MatchSet ms = om::match_mnn(a, b);
      if (!m_ens.empty()) ms = om::ensemble(ms, om::match_mnn(load(m_ens[0]), load(m_ens[1])), m_ens_params);
      ms.set_a = a.id;
      ms.set_b = b.id;
      om::Json out = om::to_json(ms);
      m_params.seed = m_seed;
      if (m_ransac != "none") {
        try {
          om::RansacResult r;
          if (m_ransac == "homography") {
            r = om::ransac_homography(ms, m_params);
          } else {
            if (m_depth_a.empty() || m_depth_b.empty() || m_k_a.empty() || m_k_b.empty())
              om::fail(om::ErrorCode::ConfigError, "pose3d needs --depth-a, --depth-b, --k-a and --k-b");
            const om::DepthMap da = om::read_depth_png(m_depth_a), db = om::read_depth_png(m_depth_b);
            r = om::ransac_pose_3d(ms, da, db, om::intrinsics_from_json(om::read_json_file(m_k_a)),
                                   om::intrinsics_from_json(om::read_json_file(m_k_b)), m_params);
          }
          out["ransac"] = om::to_json(r);
        } catch (const om::Error& e) {
          if (e.code() != om::ErrorCode::InsufficientMatches && e.code() != om::ErrorCode::NoModelFound) throw;
          out["ransac"] = om::Json{{"model", m_ransac}, {"failure", e.what()}};
        }
      }
      write_json(m_out, out);
      std::cout << ms.size() << " matches written to " << m_out << "\n";
    } else if (*ortho) {
      const om::Image img = om::read_png(o_img);
      om::OrthoSpec spec;
      if (o_mode == "depth") {
        if (o_depth.empty() || o_k.empty()) om::fail(om::ErrorCode::ConfigError, "depth mode needs --depth and --k");
        const om::DepthMap depth = om::read_depth_png(o_depth, om::ImageSize{img.width(), img.height()});
        om::Roi roi;
        roi.rect = o_roi.empty() ? om::PixelRect{0, 0, img.width(), img.height()} : parse_roi(o_roi);
        o_opt.standoff_m = o_standoff;
        auto [warped, s] = om::ortho_from_depth(img, depth, om::intrinsics_from_json(om::read_json_file(o_k)), roi, o_opt);
        om::write_png(o_out, warped.image);
        spec = std::move(s);
      } else {
        if (o_pairs.empty()) om::fail(om::ErrorCode::ConfigError, "ipm mode needs --pairs");
        const om::Json j = om::read_json_file(o_pairs);
        om::OrthoSpec parsed = om::ortho_spec_from_json(om::Json{{"mode", "ipm"},
                                                                 {"h_ortho", om::matrix_to_json(om::Mat3::Identity())},
                                                                 {"out_w", j.at("out_w")},
                                                                 {"out_h", j.at("out_h")},
                                                                 {"pairs", j.at("pairs")}});
        spec = om::ipm_from_annotations(parsed.pairs, parsed.out_w, parsed.out_h);
        om::write_png(o_out, om::apply_ortho(img, spec).image);
      }
      write_json(o_spec, om::to_json(spec));
      std::cout << "ortho view " << spec.out_w << "x" << spec.out_h << " written to " << o_out << "\n";
    } else if (*emma) {
      Timer t("eval-mma");
      const om::PipelineConfig cfg = mma_opts.build();
      const om::CorpusManifest corpus = om::load_corpus_manifest(mma_corpus);
      const om::EvalReport r = om::eval_mma(corpus, fs::path(mma_corpus).parent_path(), cfg, mma_cfg);
      write_json(mma_out, om::to_json(r));
      print_aggregate(r);
    } else if (*epose) {
      Timer t("eval-pose");
      om::PipelineConfig cfg = pose_opts.build();
      if (!pose_ortho.empty()) cfg.ortho.enabled = pose_ortho == "on";
      const om::PoseDataset ds = om::load_pose_manifest(pose_manifest);
      const om::EvalReport r = om::eval_pose_protocol(ds, cfg);
      write_json(pose_out, om::to_json(r));
      print_aggregate(r);
    } else if (*evpr) {
      Timer t("eval-vpr");
      om::PipelineConfig cfg = vpr_opts.build();
      if (!vpr_ortho.empty()) cfg.ortho.enabled = vpr_ortho == "on";
      const auto queries = om::load_place_manifest(vpr_q);
      const auto refs = om::load_place_manifest(vpr_r);
      const om::EvalReport r = om::eval_vpr(queries, refs, vpr_cfg, cfg);
      write_json(vpr_out, om::to_json(r));
      print_aggregate(r);
    } else if (*rep) {
      const om::EvalReport r = om::load_report(rep_in);
      std::cout << "kind " << r.kind << ", " << r.records.size() << " records, aggregates consistent\n";
      print_aggregate(r);
      if (!rep_csv.empty()) om::write_text_file(rep_csv, om::mma_curves_csv(r));
    } else if (*val) {
      const auto violations = om::validate_manifest(val_path, val_cmd);
      if (violations.empty()) {
        std::cout << "ok\n";
      } else {
        for (const auto& v : violations) std::cout << om::to_string(v) << "\n";
        return kExitValidation;
      }
    } else if (*scene) {
      const fs::path out(scene_out);
      if (scene_kind == "arc") {
        om::write_pose_manifest(out / "manifest.json", om::make_plane_arc(scene_seed, scene_count > 0 ? scene_count : 100));
      } else if (scene_kind == "road") {
        const om::RoadCorpus c = om::make_road_corpus(scene_seed, scene_count > 0 ? scene_count : 20);
        om::write_place_manifest(out / "queries.json", c.queries);
        om::write_place_manifest(out / "refs.json", c.references);
      } else {
        fs::create_directories(out);
        const int n = scene_count > 0 ? scene_count : 10;
        for (int i = 0; i < n; ++i) {
          char name[32];
          std::snprintf(name, sizeof(name), "texture_%02d.png", i);
          om::write_png(out / name, om::make_texture(480, 480, om::derive_seed(scene_seed, i)));
        }
      }
      std::cout << "scene written to " << scene_out << "\n";
    }
  } catch (const om::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
