#include "orthomatch/manifest.hpp"

#include <cmath>
#include <set>

#include "orthomatch/image_io.hpp"
#include "orthomatch/serialization.hpp"

namespace orthomatch {

namespace fs = std::filesystem;

ManifestKind manifest_kind_for(const std::string& command) {
  if (command == "eval-mma" || command == "corpus") return ManifestKind::Corpus;
  if (command == "eval-pose" || command == "pose") return ManifestKind::Pose;
  if (command == "eval-vpr" || command == "places") return ManifestKind::Places;
  fail(ErrorCode::InvalidArgument, "no manifest schema for command '" + command + "'");
}

std::string to_string(const Violation& v) {
  std::string s = v.index >= 0 ? "entry " + std::to_string(v.index) : std::string("manifest");
  if (!v.field.empty()) s += ", field '" + v.field + "'";
  return s + ": " + v.message;
}

namespace {

class Checker {
 public:
  explicit Checker(fs::path base) : base_(std::move(base)) {}

  std::vector<Violation> violations;

  void add(int index, std::string field, std::string message) {
    violations.push_back({index, std::move(field), std::move(message)});
  }

  const Json* member(const Json& obj, int index, const char* key, bool required = true) {
    if (obj.is_object() && obj.contains(key)) return &obj.at(key);
    if (required) add(index, key, "missing");
    return nullptr;
  }

  bool string_field(const Json& obj, int index, const char* key, std::string& out, bool required = true) {
    const Json* v = member(obj, index, key, required);
    if (!v) return false;
    if (!v->is_string() || v->get<std::string>().empty()) {
      add(index, key, "must be a non-empty string");
      return false;
    }
    out = v->get<std::string>();
    return true;
  }

  void file_field(const Json& obj, int index, const char* key, bool required = true) {
    std::string rel;
    if (!string_field(obj, index, key, rel, required)) return;
    if (!fs::is_regular_file(base_ / rel)) add(index, key, "file '" + rel + "' does not exist");
  }

  bool numbers(const Json& obj, int index, const char* key, std::size_t count, std::vector<double>& out,
               bool required = true) {
    const Json* v = member(obj, index, key, required);
    if (!v) return false;
    if (!v->is_array() || v->size() != count) {
      add(index, key, "must be an array of " + std::to_string(count) + " numbers");
      return false;
    }
    out.clear();
    for (const Json& x : *v) {
      if (!x.is_number() || !std::isfinite(x.get<double>())) {
        add(index, key, "must contain finite numbers only");
        return false;
      }
      out.push_back(x.get<double>());
    }
    return true;
  }

  void unique_id(const Json& obj, int index, std::set<std::string>& ids, std::string* out = nullptr) {
    std::string id;
    if (!string_field(obj, index, "id", id)) return;
    if (!ids.insert(id).second) add(index, "id", "duplicate id '" + id + "'");
    if (out) *out = id;
  }

  template <typename Fn>
  void parses(int index, const char* field, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      add(index, field, e.what());
    } catch (const nlohmann::json::exception& e) {
      add(index, field, e.what());
    }
  }

 private:
  fs::path base_;
};

Mat3 to_mat3(const std::vector<double>& v) {
  Mat3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = v[i];
  return m;
}

const Json* top_array(Checker& c, const Json& j, const char* schema, const char* key) {
  if (!j.is_object()) {
    c.add(-1, "", "manifest must be a JSON object");
    return nullptr;
  }
  if (j.contains("schema") && j.at("schema") != schema) c.add(-1, "schema", std::string("expected '") + schema + "'");
  if (!j.contains("version") || !j.at("version").is_number_integer() || j.at("version").get<int>() != 1)
    c.add(-1, "version", "must be 1");
  const Json* arr = c.member(j, -1, key);
  if (arr && !arr->is_array()) {
    c.add(-1, key, "must be an array");
    return nullptr;
  }
  return arr;
}

void check_corpus(Checker& c, const Json& j) {
  const Json* pairs = top_array(c, j, "orthomatch.corpus", "pairs");
  std::set<std::string> ids;
  if (pairs)
    for (std::size_t i = 0; i < pairs->size(); ++i) {
      const int idx = static_cast<int>(i);
      const Json& e = (*pairs)[i];
      if (!e.is_object()) {
        c.add(idx, "", "entry must be an object");
        continue;
      }
      c.unique_id(e, idx, ids);
      c.file_field(e, idx, "image_a");
      c.file_field(e, idx, "image_b");
      std::vector<double> h;
      std::optional<Homographyd> stored;
      if (c.numbers(e, idx, "h_gt", 9, h)) c.parses(idx, "h_gt", [&] { stored = Homographyd::from_matrix(to_mat3(h)); });
      if (const Json* spec = c.member(e, idx, "spec")) {
        c.parses(idx, "spec", [&] {
          const PairSpec s = pair_spec_from_json(*spec);
          if (stored && (s.h_gt.matrix() - stored->matrix()).norm() > 1e-12 * std::max(1.0, stored->matrix().norm()))
            fail(ErrorCode::InvariantError, "primitive transforms do not reproduce h_gt");
        });
      }
    }
  if (j.is_object()) {
    if (const Json* cfg = c.member(j, -1, "config")) c.parses(-1, "config", [&] { synth_config_from_json(*cfg).validate(); });
    if (const Json* seed = c.member(j, -1, "seed"); seed && !seed->is_number_unsigned())
      c.add(-1, "seed", "must be a non-negative integer");
    std::string gen;
    c.string_field(j, -1, "generator", gen);
  }
}

void check_pose(Checker& c, const Json& j) {
  const Json* images = top_array(c, j, "orthomatch.pose_manifest", "images");
  std::set<std::string> ids;
  if (images)
    for (std::size_t i = 0; i < images->size(); ++i) {
      const int idx = static_cast<int>(i);
      const Json& e = (*images)[i];
      if (!e.is_object()) {
        c.add(idx, "", "entry must be an object");
        continue;
      }
      c.unique_id(e, idx, ids);
      c.file_field(e, idx, "image");
      c.file_field(e, idx, "depth");
      std::vector<double> v;
      if (c.numbers(e, idx, "k", 9, v)) c.parses(idx, "k", [&] { Intrinsicsd::from_matrix(to_mat3(v)); });
      if (const Json* pose = c.member(e, idx, "pose")) c.parses(idx, "pose", [&] { pose_from_json(*pose); });
      if (c.numbers(e, idx, "roi", 4, v, false))
        if (!(v[0] >= 0 && v[1] >= 0 && v[2] > v[0] && v[3] > v[1]) ||
            v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]) || v[2] != std::floor(v[2]) || v[3] != std::floor(v[3]))
          c.add(idx, "roi", "must be integers x0, y0, x1, y1 with x0 < x1 and y0 < y1");
      std::string seq;
      c.string_field(e, idx, "sequence", seq, false);
    }
  const Json* reps = j.is_object() ? c.member(j, -1, "representatives") : nullptr;
  if (reps && !reps->is_array()) c.add(-1, "representatives", "must be an array");
  else if (reps)
    for (std::size_t i = 0; i < reps->size(); ++i) {
      const int idx = static_cast<int>(i);
      const Json& r = (*reps)[i];
      std::string id;
      if (c.string_field(r, idx, "id", id) && !ids.count(id))
        c.add(idx, "representatives.id", "unknown image id '" + id + "'");
      const Json* cands = c.member(r, idx, "candidates");
      if (cands && (!cands->is_array() || cands->empty())) c.add(idx, "representatives.candidates", "must be a non-empty array");
      else if (cands)
        for (const Json& cand : *cands)
          if (!cand.is_string() || !ids.count(cand.get<std::string>()))
            c.add(idx, "representatives.candidates", "unknown image id " + cand.dump());
    }
}

void check_places(Checker& c, const Json& j) {
  const Json* images = top_array(c, j, "orthomatch.place_manifest", "images");
  std::set<std::string> ids;
  if (!images) return;
  for (std::size_t i = 0; i < images->size(); ++i) {
    const int idx = static_cast<int>(i);
    const Json& e = (*images)[i];
    if (!e.is_object()) {
      c.add(idx, "", "entry must be an object");
      continue;
    }
    c.unique_id(e, idx, ids);
    c.file_field(e, idx, "image");
    std::vector<double> xy;
    c.numbers(e, idx, "xy", 2, xy);
    if (const Json* ipm = c.member(e, idx, "ipm", false)) c.parses(idx, "ipm", [&] { ortho_spec_from_json(*ipm); });
  }
}

[[noreturn]] void throw_violations(const fs::path& path, const std::vector<Violation>& vs) {
  std::string msg = path.string() + " failed validation:";
  for (const Violation& v : vs) msg += "\n  " + to_string(v);
  fail(ErrorCode::ManifestError, msg);
}

Json validated(const fs::path& path, ManifestKind kind) {
  const auto vs = validate_manifest(path, kind);
  if (!vs.empty()) throw_violations(path, vs);
  return read_json_file(path);
}

Json matrix_json(const Mat3& m) { return matrix_to_json(m); }

}  // namespace

std::vector<Violation> validate_manifest(const fs::path& path, ManifestKind kind) {
  if (!fs::is_regular_file(path)) fail(ErrorCode::IOError, "cannot read " + path.string());
  Checker c(path.parent_path());
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IOError) throw;
    c.add(-1, "", e.what());
    return c.violations;
  }
  switch (kind) {
    case ManifestKind::Corpus: check_corpus(c, j); break;
    case ManifestKind::Pose: check_pose(c, j); break;
    case ManifestKind::Places: check_places(c, j); break;
  }
  return c.violations;
}

std::vector<Violation> validate_manifest(const fs::path& path, const std::string& command) {
  return validate_manifest(path, manifest_kind_for(command));
}

CorpusManifest load_corpus_manifest(const fs::path& path) {
  return corpus_manifest_from_json(validated(path, ManifestKind::Corpus));
}

PoseDataset load_pose_manifest(const fs::path& path) {
  const Json j = validated(path, ManifestKind::Pose);
  const fs::path base = path.parent_path();
  PoseDataset ds;
  for (const Json& e : j.at("images")) {
    PoseView v;
    v.id = e.at("id").get<std::string>();
    v.sequence = e.value("sequence", std::string("default"));
    v.image = read_png(base / e.at("image").get<std::string>());
    v.depth = read_depth_png(base / e.at("depth").get<std::string>(), ImageSize{v.image.width(), v.image.height()});
    v.k = intrinsics_from_json(e.at("k"));
    v.camera_from_world = pose_from_json(e.at("pose"));
    if (e.contains("roi")) {
      const Json& r = e.at("roi");
      v.roi = {r[0].get<int>(), r[1].get<int>(), r[2].get<int>(), r[3].get<int>()};
      if (!v.roi.within(v.image.width(), v.image.height()))
        fail(ErrorCode::ManifestError, "image '" + v.id + "': roi outside the image");
    } else {
      v.roi = {0, 0, v.image.width(), v.image.height()};
    }
    ds.views.push_back(std::move(v));
  }
  for (const Json& r : j.at("representatives")) {
    PoseGroup g;
    g.representative = r.at("id").get<std::string>();
    for (const Json& c : r.at("candidates")) g.candidates.push_back(c.get<std::string>());
    ds.groups.push_back(std::move(g));
  }
  return ds;
}

std::vector<PlaceView> load_place_manifest(const fs::path& path) {
  const Json j = validated(path, ManifestKind::Places);
  const fs::path base = path.parent_path();
  std::vector<PlaceView> out;
  for (const Json& e : j.at("images")) {
    PlaceView v;
    v.id = e.at("id").get<std::string>();
    v.image = read_png(base / e.at("image").get<std::string>());
    v.xy = Vec2(e.at("xy")[0].get<double>(), e.at("xy")[1].get<double>());
    if (e.contains("ipm")) v.ipm = ortho_spec_from_json(e.at("ipm"));
    out.push_back(std::move(v));
  }
  return out;
}

void write_pose_manifest(const fs::path& path, const PoseDataset& ds) {
  const fs::path base = path.parent_path();
  if (!base.empty()) fs::create_directories(base);
  Json images = Json::array();
  for (const PoseView& v : ds.views) {
    const std::string image = v.id + ".png", depth = v.id + "_depth.png";
    write_png(base / image, v.image);
    write_depth_png(base / depth, v.depth);
    images.push_back(Json{{"id", v.id},
                          {"image", image},
                          {"depth", depth},
                          {"k", matrix_json(v.k.matrix())},
                          {"pose", to_json(v.camera_from_world)},
                          {"roi", Json::array({v.roi.x0, v.roi.y0, v.roi.x1, v.roi.y1})},
                          {"sequence", v.sequence}});
  }
  Json reps = Json::array();
  for (const PoseGroup& g : ds.groups) reps.push_back(Json{{"id", g.representative}, {"candidates", g.candidates}});
  write_text_file(path, dump_json(Json{{"schema", "orthomatch.pose_manifest"},
                                       {"version", 1},
                                       {"images", images},
                                       {"representatives", reps}}));
}

void write_place_manifest(const fs::path& path, const std::vector<PlaceView>& views) {
  const fs::path base = path.parent_path();
  if (!base.empty()) fs::create_directories(base);
  Json images = Json::array();
  for (const PlaceView& v : views) {
    const std::string image = v.id + ".png";
    write_png(base / image, v.image);
    Json e{{"id", v.id}, {"image", image}, {"xy", Json::array({v.xy.x(), v.xy.y()})}};
    if (v.ipm) e["ipm"] = to_json(*v.ipm);
    images.push_back(std::move(e));
  }
  write_text_file(path, dump_json(Json{{"schema", "orthomatch.place_manifest"}, {"version", 1}, {"images", images}}));
}

}  // namespace orthomatch
