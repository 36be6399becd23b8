#include "orthomatch/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

namespace orthomatch {

namespace {

// Support radius of a full-support keypoint: rotated patch corner plus the
// bilinear tap.
constexpr int kSupportRadius = 13;

struct WorkingView {
  Image gray;
  std::vector<std::uint8_t> validity;  // empty when every pixel is valid
  std::optional<OrthoSpec> spec;
};

class Stopwatch {
 public:
  Stopwatch(std::vector<StageTiming>& out, const char* stage)
      : out_(out), stage_(stage), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() {
    const auto end = std::chrono::steady_clock::now();
    out_.push_back({stage_, std::chrono::duration<double, std::milli>(end - start_).count()});
  }

 private:
  std::vector<StageTiming>& out_;
  const char* stage_;
  std::chrono::steady_clock::time_point start_;
};

// Error text without the "Code: " prefix added by Error.
std::string message_of(const Error& e) {
  const std::string what = e.what();
  const std::string prefix = std::string(to_string(e.code())) + ": ";
  return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

Error with_context(const Error& e, const std::string& pair, const char* stage) {
  const std::string msg = message_of(e);
  if (msg.rfind("pair ", 0) == 0) return e;
  return Error(e.code(), "pair " + pair + ", stage " + stage + ": " + msg);
}

template <typename Fn>
auto in_stage(const std::string& pair, const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw with_context(e, pair, stage);
  }
}

WorkingView prepare(const ViewInput& v, const PipelineConfig& cfg, const std::string& pair) {
  if (!v.image || v.image->empty()) fail(ErrorCode::InvalidArgument, "pair " + pair + ": view '" + v.id + "' has no image");
  WorkingView w;
  Image gray = grayscale(*v.image);
  if (!cfg.ortho.enabled) {
    w.gray = std::move(gray);
    return w;
  }
  if (v.ortho) {
    WarpResult r = apply_ortho(gray, *v.ortho);
    w.gray = std::move(r.image);
    w.validity = std::move(r.validity);
    w.spec = *v.ortho;
    return w;
  }
  if (!v.depth || !v.k)
    fail(ErrorCode::ConfigError, "pair " + pair + ", stage ortho: view '" + v.id +
                                     "' needs a depth map and intrinsics (or an IPM spec) when ortho is enabled");
  Roi roi;
  roi.rect = v.roi.value_or(PixelRect{0, 0, gray.width(), gray.height()});
  OrthoOptions opt;
  opt.standoff_m = cfg.ortho.standoff_m;
  opt.max_side = cfg.ortho.max_side;
  opt.min_valid_pixels = static_cast<std::size_t>(cfg.ortho.min_valid_pixels);
  auto [r, spec] = ortho_from_depth(gray, *v.depth, *v.k, roi, opt);
  w.gray = std::move(r.image);
  w.validity = std::move(r.validity);
  w.spec = std::move(spec);
  return w;
}

std::vector<Keypoint> detect(const WorkingView& w, const PipelineConfig& cfg) {
  std::vector<Keypoint> kps = keypoints_with_full_support(w.gray, detect_harris(w.gray, cfg.detector));
  if (w.validity.empty()) return kps;
  // Drop keypoints whose support reaches outside the rendered area.
  const int width = w.gray.width();
  std::vector<Keypoint> kept;
  for (const Keypoint& kp : kps) {
    const int cx = static_cast<int>(std::lround(kp.x)), cy = static_cast<int>(std::lround(kp.y));
    bool ok = true;
    for (int y = cy - kSupportRadius; y <= cy + kSupportRadius && ok; ++y)
      for (int x = cx - kSupportRadius; x <= cx + kSupportRadius && ok; ++x)
        ok = x >= 0 && y >= 0 && x < width && y < w.gray.height() && w.validity[static_cast<std::size_t>(y) * width + x];
    if (ok) kept.push_back(kp);
  }
  return kept;
}

}  // namespace

PipelineResult run_pipeline(const ViewInput& a, const ViewInput& b, const PipelineConfig& cfg) {
  cfg.validate();
  const std::string pair = a.id + "/" + b.id;
  PipelineResult out;

  WorkingView wa, wb;
  {
    Stopwatch t(out.timings, "ortho");
    wa = in_stage(pair, "ortho", [&] { return prepare(a, cfg, pair); });
    wb = in_stage(pair, "ortho", [&] { return prepare(b, cfg, pair); });
  }
  out.ortho_a = wa.spec;
  out.ortho_b = wb.spec;

  std::vector<Keypoint> ka, kb;
  {
    Stopwatch t(out.timings, "detect");
    ka = in_stage(pair, "detect", [&] { return detect(wa, cfg); });
    kb = in_stage(pair, "detect", [&] { return detect(wb, cfg); });
  }
  out.keypoints_a = ka.size();
  out.keypoints_b = kb.size();

  const bool use_vanilla = cfg.head != HeadMode::Robust;
  const bool use_robust = cfg.head != HeadMode::Vanilla;
  DescriptorSet va, vb, ra, rb;
  {
    Stopwatch t(out.timings, "describe");
    in_stage(pair, "describe", [&] {
      if (use_vanilla) va = describe_vanilla(wa.gray, ka), vb = describe_vanilla(wb.gray, kb);
      if (use_robust) ra = describe_robust(wa.gray, ka), rb = describe_robust(wb.gray, kb);
      return 0;
    });
  }

  MatchSet mv, mr;
  {
    Stopwatch t(out.timings, "match");
    in_stage(pair, "match", [&] {
      if (use_vanilla) mv = match_mnn(va, vb);
      if (use_robust) mr = match_mnn(ra, rb);
      return 0;
    });
  }
  if (cfg.head == HeadMode::Ensemble) {
    Stopwatch t(out.timings, "ensemble");
    out.matches = in_stage(pair, "ensemble", [&] { return ensemble(mv, mr, cfg.ensemble); });
  } else {
    out.matches = use_vanilla ? std::move(mv) : std::move(mr);
  }
  out.matches.set_a = a.id;
  out.matches.set_b = b.id;

  if (wa.spec && wb.spec) {
    Stopwatch t(out.timings, "backproject");
    out.perspective_matches =
        in_stage(pair, "backproject", [&] { return backproject_matches(out.matches, *wa.spec, *wb.spec).matches; });
  } else {
    out.perspective_matches = out.matches;
  }

  if (cfg.ransac_model == RansacModel::None) return out;
  Stopwatch t(out.timings, "ransac");
  RansacParams params = cfg.ransac;
  params.seed = cfg.seed;
  try {
    if (cfg.ransac_model == RansacModel::Homography) {
      out.ransac = ransac_homography(out.matches, params);
    } else {
      for (const ViewInput* v : {&a, &b})
        if (!v->depth || !v->k)
          fail(ErrorCode::ConfigError, "pair " + pair + ", stage ransac: view '" + v->id +
                                           "' needs a depth map and intrinsics for pose3d");
      out.ransac = ransac_pose_3d(out.perspective_matches, *a.depth, *b.depth, *a.k, *b.k, params);
    }
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::InsufficientMatches:
      case ErrorCode::NoModelFound:
      case ErrorCode::DegenerateSample:
      case ErrorCode::DegenerateConfiguration:
      case ErrorCode::DegenerateHomography:
        out.ransac_failure = e.what();
        break;
      default:
        throw with_context(e, pair, "ransac");
    }
  }
  return out;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  // Errors are kept per index so the one reported does not depend on scheduling.
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace orthomatch
