#include "orthomatch/serialization.hpp"

#include <fstream>
#include <sstream>

namespace orthomatch {

namespace {

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorCode::FormatError, std::string("missing key '") + key + "'");
  return j.at(key);
}

double number(const Json& j) {
  if (!j.is_number()) fail(ErrorCode::FormatError, "expected a number");
  return j.get<double>();
}

}  // namespace

Json matrix_to_json(const Mat3& m) {
  Json a = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

Mat3 matrix_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 9) fail(ErrorCode::FormatError, "expected a 9-element row-major matrix");
  Mat3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = number(j[i]);
  return m;
}

Json vector_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vector3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::FormatError, "expected a 3-vector");
  return {number(j[0]), number(j[1]), number(j[2])};
}

Json to_json(const Homographyd& h) { return Json{{"h", matrix_to_json(h.matrix())}}; }

Homographyd homography_from_json(const Json& j) {
  return Homographyd::from_matrix(matrix_from_json(j.is_array() ? j : require(j, "h")));
}

Json to_json(const Intrinsicsd& k) { return Json{{"k", matrix_to_json(k.matrix())}}; }

Intrinsicsd intrinsics_from_json(const Json& j) {
  return Intrinsicsd::from_matrix(matrix_from_json(j.is_array() ? j : require(j, "k")));
}

Json to_json(const Posed& p) {
  return Json{{"r", matrix_to_json(p.rotation.matrix())}, {"t", vector_to_json(p.translation)}};
}

Posed pose_from_json(const Json& j) {
  Posed p;
  p.rotation = Rotationd::from_matrix(matrix_from_json(require(j, "r")));
  p.translation = vector3_from_json(require(j, "t"));
  return p;
}

Json to_json(const MatchSet& ms) {
  Json pairs = Json::array(), points = Json::array();
  for (const Match& m : ms.matches) {
    pairs.push_back(Json::array({m.index_a, m.index_b, m.distance, std::string(to_string(m.head))}));
    points.push_back(Json::array({m.point_a.x(), m.point_a.y(), m.point_b.x(), m.point_b.y()}));
  }
  return Json{{"set_a", ms.set_a}, {"set_b", ms.set_b}, {"pairs", pairs}, {"points", points}};
}

MatchSet match_set_from_json(const Json& j) {
  MatchSet ms;
  if (j.contains("set_a")) ms.set_a = j.at("set_a").get<std::string>();
  if (j.contains("set_b")) ms.set_b = j.at("set_b").get<std::string>();
  const Json& pairs = require(j, "pairs");
  const Json* points = j.contains("points") ? &j.at("points") : nullptr;
  if (points && points->size() != pairs.size()) fail(ErrorCode::FormatError, "points and pairs differ in length");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Json& p = pairs[i];
    if (!p.is_array() || p.size() != 4) fail(ErrorCode::FormatError, "match entries are [ia, ib, distance, head]");
    Match m;
    m.index_a = p[0].get<int>();
    m.index_b = p[1].get<int>();
    m.distance = number(p[2]);
    m.head = head_from_string(p[3].get<std::string>());
    if (points) {
      const Json& q = (*points)[i];
      m.point_a = Vec2(number(q[0]), number(q[1]));
      m.point_b = Vec2(number(q[2]), number(q[3]));
    }
    ms.matches.push_back(m);
  }
  return ms;
}

Json to_json(const RansacResult& r) {
  Json j;
  if (std::holds_alternative<Homographyd>(r.model)) {
    j["model"] = "homography";
    j["h"] = matrix_to_json(r.homography().matrix());
  } else {
    j["model"] = "pose3d";
    j["r"] = matrix_to_json(r.pose().rotation.matrix());
    j["t"] = vector_to_json(r.pose().translation);
  }
  j["inlier_count"] = r.inlier_count;
  j["iterations_run"] = r.iterations_run;
  Json flags = Json::array();
  for (auto f : r.inliers) flags.push_back(f != 0);
  j["inliers"] = flags;
  return j;
}

Json to_json(const OrthoSpec& spec) {
  Json j;
  j["mode"] = spec.mode == OrthoMode::SurfaceNormal ? "surface_normal" : "ipm";
  j["h_ortho"] = matrix_to_json(spec.h_ortho.matrix());
  j["out_w"] = spec.out_w;
  j["out_h"] = spec.out_h;
  if (spec.plane) {
    j["plane"] = Json{{"n", vector_to_json(spec.plane->plane.normal.vector())},
                      {"d", spec.plane->plane.d},
                      {"rms", spec.plane->rms},
                      {"centroid", vector_to_json(spec.plane->centroid)},
                      {"points", spec.plane->point_count}};
  }
  if (spec.mode == OrthoMode::Ipm) {
    Json pairs = Json::array();
    for (const auto& p : spec.pairs) pairs.push_back(Json::array({p.source.x(), p.source.y(), p.target.x(), p.target.y()}));
    j["pairs"] = pairs;
  }
  return j;
}

OrthoSpec ortho_spec_from_json(const Json& j) {
  OrthoSpec spec;
  const std::string mode = require(j, "mode").get<std::string>();
  if (mode == "surface_normal") spec.mode = OrthoMode::SurfaceNormal;
  else if (mode == "ipm") spec.mode = OrthoMode::Ipm;
  else fail(ErrorCode::FormatError, "unknown ortho mode '" + mode + "'");
  spec.h_ortho = Homographyd::from_matrix(matrix_from_json(require(j, "h_ortho")));
  spec.out_w = require(j, "out_w").get<int>();
  spec.out_h = require(j, "out_h").get<int>();
  if (spec.out_w <= 0 || spec.out_h <= 0) fail(ErrorCode::FormatError, "ortho output size must be positive");
  if (j.contains("plane")) {
    const Json& p = j.at("plane");
    PlaneFit fit;
    fit.plane = Planed(UnitVector3d(vector3_from_json(require(p, "n"))), number(require(p, "d")));
    fit.rms = number(require(p, "rms"));
    if (p.contains("centroid")) fit.centroid = vector3_from_json(p.at("centroid"));
    if (p.contains("points")) fit.point_count = p.at("points").get<std::size_t>();
    spec.plane = fit;
  }
  if (j.contains("pairs"))
    for (const Json& p : j.at("pairs")) {
      if (!p.is_array() || p.size() != 4) fail(ErrorCode::FormatError, "IPM pairs are [sx, sy, tx, ty]");
      spec.pairs.push_back({Vec2(number(p[0]), number(p[1])), Vec2(number(p[2]), number(p[3]))});
    }
  return spec;
}

Json to_json(const SynthConfig& c) {
  return Json{{"crop_size", c.crop_size},         {"rotation_step_deg", c.rotation_step_deg},
              {"rotation_sweep", c.rotation_sweep}, {"scale_min", c.scale_min},
              {"scale_max", c.scale_max},         {"shear_max", c.shear_max},
              {"perspective_max", c.perspective_max}, {"noise_sigma", c.noise_sigma},
              {"pairs_per_image", c.pairs_per_image}};
}

SynthConfig synth_config_from_json(const Json& j) {
  SynthConfig c;
  c.crop_size = require(j, "crop_size").get<int>();
  c.rotation_step_deg = number(require(j, "rotation_step_deg"));
  c.rotation_sweep = require(j, "rotation_sweep").get<bool>();
  c.scale_min = number(require(j, "scale_min"));
  c.scale_max = number(require(j, "scale_max"));
  c.shear_max = number(require(j, "shear_max"));
  c.perspective_max = number(require(j, "perspective_max"));
  c.noise_sigma = number(require(j, "noise_sigma"));
  c.pairs_per_image = require(j, "pairs_per_image").get<int>();
  return c;
}

Json to_json(const PairSpec& s) {
  return Json{{"source", s.source_id},
              {"crop", Json::array({s.crop.x0, s.crop.y0, s.crop.x1, s.crop.y1})},
              {"theta_deg", s.transform.theta_deg},
              {"scale", s.transform.scale},
              {"shear", s.transform.shear},
              {"perspective", Json::array({s.transform.perspective_x, s.transform.perspective_y})},
              {"canvas_offset", Json::array({s.canvas_offset.x(), s.canvas_offset.y()})},
              {"canvas", Json::array({s.canvas_w, s.canvas_h})},
              {"seed", s.seed}};
}

PairSpec pair_spec_from_json(const Json& j) {
  PairSpec s;
  s.source_id = require(j, "source").get<std::string>();
  const Json& crop = require(j, "crop");
  if (!crop.is_array() || crop.size() != 4) fail(ErrorCode::FormatError, "crop is [x0, y0, x1, y1]");
  s.crop = {crop[0].get<int>(), crop[1].get<int>(), crop[2].get<int>(), crop[3].get<int>()};
  s.transform.theta_deg = number(require(j, "theta_deg"));
  s.transform.scale = number(require(j, "scale"));
  s.transform.shear = number(require(j, "shear"));
  const Json& persp = require(j, "perspective");
  s.transform.perspective_x = number(persp.at(0));
  s.transform.perspective_y = number(persp.at(1));
  const Json& off = require(j, "canvas_offset");
  s.canvas_offset = Vec2(number(off.at(0)), number(off.at(1)));
  const Json& canvas = require(j, "canvas");
  s.canvas_w = canvas.at(0).get<int>();
  s.canvas_h = canvas.at(1).get<int>();
  s.seed = require(j, "seed").get<std::uint64_t>();
  s.h_gt = pair_homography(s);
  return s;
}

Json to_json(const CorpusManifest& m) {
  Json entries = Json::array();
  for (const CorpusEntry& e : m.entries) {
    entries.push_back(Json{{"id", e.id},
                           {"image_a", e.image_a},
                           {"image_b", e.image_b},
                           {"h_gt", matrix_to_json(e.spec.h_gt.matrix())},
                           {"spec", to_json(e.spec)}});
  }
  return Json{{"schema", "orthomatch.corpus"}, {"version", m.version}, {"generator", m.generator},
              {"seed", m.seed},                {"config", to_json(m.config)},  {"pairs", entries}};
}

CorpusManifest corpus_manifest_from_json(const Json& j) {
  CorpusManifest m;
  m.version = require(j, "version").get<int>();
  if (m.version != 1) fail(ErrorCode::FormatError, "unsupported corpus manifest version");
  m.generator = require(j, "generator").get<std::string>();
  m.seed = require(j, "seed").get<std::uint64_t>();
  m.config = synth_config_from_json(require(j, "config"));
  for (const Json& e : require(j, "pairs")) {
    CorpusEntry entry;
    entry.id = require(e, "id").get<std::string>();
    entry.image_a = require(e, "image_a").get<std::string>();
    entry.image_b = require(e, "image_b").get<std::string>();
    entry.spec = pair_spec_from_json(require(e, "spec"));
    // The stored matrix is authoritative; the primitives must agree with it.
    entry.spec.h_gt = Homographyd::from_matrix(matrix_from_json(require(e, "h_gt")));
    m.entries.push_back(std::move(entry));
  }
  return m;
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IOError, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IOError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IOError, "short write to " + path.string());
}

}  // namespace orthomatch
