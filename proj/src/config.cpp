#include "orthomatch/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

namespace orthomatch {

std::string_view to_string(HeadMode mode) {
  switch (mode) {
    case HeadMode::Vanilla: return "vanilla";
    case HeadMode::Robust: return "robust";
    case HeadMode::Ensemble: return "ensemble";
  }
  return "unknown";
}

std::string_view to_string(RansacModel model) {
  switch (model) {
    case RansacModel::None: return "none";
    case RansacModel::Homography: return "homography";
    case RansacModel::Pose3d: return "pose3d";
  }
  return "unknown";
}

namespace {

HeadMode head_mode_from(const std::string& s) {
  if (s == "vanilla") return HeadMode::Vanilla;
  if (s == "robust") return HeadMode::Robust;
  if (s == "ensemble") return HeadMode::Ensemble;
  fail(ErrorCode::ConfigError, "head must be vanilla, robust or ensemble, got '" + s + "'");
}

RansacModel ransac_model_from(const std::string& s) {
  if (s == "none") return RansacModel::None;
  if (s == "homography") return RansacModel::Homography;
  if (s == "pose3d") return RansacModel::Pose3d;
  fail(ErrorCode::ConfigError, "ransac.model must be none, homography or pose3d, got '" + s + "'");
}

void range(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::ConfigOutOfRange, what);
}

// Reads typed members out of one JSON object and rejects whatever is left.
class Section {
 public:
  Section(const Json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) fail(ErrorCode::ConfigError, where() + "must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const Json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
            throw std::invalid_argument("non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("number");
      } else {
        if (!v.is_string()) throw std::invalid_argument("string");
      }
      out = v.get<T>();
    } catch (const std::invalid_argument& e) {
      fail(ErrorCode::ConfigError, where() + "'" + key + "' must be a " + e.what());
    }
  }

  void get_optional(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const Json& v = j_.at(key);
    if (v.is_null()) out.reset();
    else if (v.is_number()) out = v.get<double>();
    else fail(ErrorCode::ConfigError, where() + "'" + key + "' must be a number or null");
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(ErrorCode::ConfigError, where() + "unknown key '" + key + "'");
  }

 private:
  std::string where() const { return name_.empty() ? std::string("config: ") : "config." + name_ + ": "; }

  const Json& j_;
  std::string name_;
  std::set<std::string, std::less<>> seen_;
};

}  // namespace

void PipelineConfig::validate() const {
  range(detector.max_keypoints >= 1 && detector.max_keypoints <= 100000, "detector.max_keypoints must lie in [1, 100000]");
  range(detector.nms_radius >= 1 && detector.nms_radius <= 50, "detector.nms_radius must lie in [1, 50]");
  range(detector.k > 0 && detector.k < 0.25, "detector.k must lie in (0, 0.25)");
  range(detector.sigma > 0 && detector.sigma <= 10, "detector.sigma must lie in (0, 10]");
  range(detector.relative_threshold >= 0 && detector.relative_threshold < 1,
        "detector.relative_threshold must lie in [0, 1)");
  range(ensemble.keep_fraction > 0 && ensemble.keep_fraction <= 1, "ensemble.keep_fraction must lie in (0, 1]");
  range(ensemble.duplicate_radius_px >= 0, "ensemble.duplicate_radius_px must be >= 0");
  range(!ortho.standoff_m || *ortho.standoff_m > 0, "ortho.standoff_m must be positive");
  range(ortho.max_side >= 16 && ortho.max_side <= 8192, "ortho.max_side must lie in [16, 8192]");
  range(ortho.min_valid_pixels >= 3, "ortho.min_valid_pixels must be >= 3");
  range(ransac.threshold_px > 0, "ransac.threshold_px must be positive");
  range(ransac.threshold_m > 0, "ransac.threshold_m must be positive");
  range(ransac.max_iters >= 1 && ransac.max_iters <= 1000000, "ransac.max_iters must lie in [1, 1000000]");
  range(ransac.confidence > 0 && ransac.confidence < 1, "ransac.confidence must lie in (0, 1)");
  range(workers >= 1 && workers <= 256, "workers must lie in [1, 256]");
}

int PipelineConfig::effective_workers() const {
  int n = workers;
  if (const char* env = std::getenv("ORTHOMATCH_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return std::max(n, 1);
}

Json to_json(const PipelineConfig& c) {
  Json j;
  j["detector"] = Json{{"max_keypoints", c.detector.max_keypoints},
                       {"nms_radius", c.detector.nms_radius},
                       {"k", c.detector.k},
                       {"sigma", c.detector.sigma},
                       {"relative_threshold", c.detector.relative_threshold}};
  j["head"] = std::string(to_string(c.head));
  j["ensemble"] = Json{{"keep_fraction", c.ensemble.keep_fraction},
                       {"duplicate_radius_px", c.ensemble.duplicate_radius_px}};
  j["ortho"] = Json{{"enabled", c.ortho.enabled},
                    {"standoff_m", c.ortho.standoff_m ? Json(*c.ortho.standoff_m) : Json(nullptr)},
                    {"max_side", c.ortho.max_side},
                    {"min_valid_pixels", c.ortho.min_valid_pixels}};
  j["ransac"] = Json{{"model", std::string(to_string(c.ransac_model))},
                     {"threshold_px", c.ransac.threshold_px},
                     {"threshold_m", c.ransac.threshold_m},
                     {"max_iters", c.ransac.max_iters},
                     {"confidence", c.ransac.confidence}};
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  return j;
}

PipelineConfig config_from_json(const Json& j) {
  PipelineConfig c;
  Section root(j, "");
  if (const Json* d = root.child("detector")) {
    Section s(*d, "detector");
    s.get("max_keypoints", c.detector.max_keypoints);
    s.get("nms_radius", c.detector.nms_radius);
    s.get("k", c.detector.k);
    s.get("sigma", c.detector.sigma);
    s.get("relative_threshold", c.detector.relative_threshold);
    s.finish();
  }
  std::string head(to_string(c.head));
  root.get("head", head);
  c.head = head_mode_from(head);
  if (const Json* e = root.child("ensemble")) {
    Section s(*e, "ensemble");
    s.get("keep_fraction", c.ensemble.keep_fraction);
    s.get("duplicate_radius_px", c.ensemble.duplicate_radius_px);
    s.finish();
  }
  if (const Json* o = root.child("ortho")) {
    Section s(*o, "ortho");
    s.get("enabled", c.ortho.enabled);
    s.get_optional("standoff_m", c.ortho.standoff_m);
    s.get("max_side", c.ortho.max_side);
    s.get("min_valid_pixels", c.ortho.min_valid_pixels);
    s.finish();
  }
  if (const Json* r = root.child("ransac")) {
    Section s(*r, "ransac");
    std::string model(to_string(c.ransac_model));
    s.get("model", model);
    c.ransac_model = ransac_model_from(model);
    s.get("threshold_px", c.ransac.threshold_px);
    s.get("threshold_m", c.ransac.threshold_m);
    s.get("max_iters", c.ransac.max_iters);
    s.get("confidence", c.ransac.confidence);
    s.finish();
  }
  root.get("seed", c.seed);
  root.get("workers", c.workers);
  root.finish();
  c.ransac.seed = c.seed;
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, e.what());
  }
  return config_from_json(j);
}

void apply_override(PipelineConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) fail(ErrorCode::ConfigError, "override must look like key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json j = to_json(cfg);
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) fail(ErrorCode::ConfigError, "malformed override key '" + key + "'");
    if (!node->is_object() || !node->contains(part)) fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
  cfg = config_from_json(j);
}

}  // namespace orthomatch
