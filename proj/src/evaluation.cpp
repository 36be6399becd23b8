#include "orthomatch/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "orthomatch/image_io.hpp"
#include "orthomatch/pipeline.hpp"

namespace orthomatch {

void MMAConfig::validate() const {
  if (thresholds.empty()) fail(ErrorCode::ConfigOutOfRange, "MMA needs at least one threshold");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0)) fail(ErrorCode::ConfigOutOfRange, "MMA thresholds must be positive");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      fail(ErrorCode::ConfigOutOfRange, "MMA thresholds must be strictly ascending");
  }
}

void VPRConfig::validate() const {
  if (!(prior_radius_m > 0) || !(localization_radius_m > 0))
    fail(ErrorCode::ConfigOutOfRange, "VPR radii must be positive");
  if (!(localization_radius_m < prior_radius_m))
    fail(ErrorCode::ConfigOutOfRange, "localization radius must be smaller than the prior radius");
}

namespace {

MMAResult score(const std::vector<double>& errors, std::span<const double> thresholds) {
  MMAResult r;
  r.matches = errors.size();
  r.empty = errors.empty();
  r.accuracy.assign(thresholds.size(), 0.0);
  if (r.empty) return r;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    std::size_t correct = 0;
    for (double e : errors) correct += e < thresholds[t];
    r.accuracy[t] = static_cast<double>(correct) / static_cast<double>(errors.size());
  }
  return r;
}

double reprojection_error(const Homographyd& h, const Vec2& a, const Vec2& b) {
  const Vec3 q = h.matrix() * a.homogeneous();
  if (!(std::abs(q.z()) > 1e-12)) return std::numeric_limits<double>::infinity();
  return (q.head<2>() / q.z() - b).norm();
}

}  // namespace

MMAResult mma(const MatchSet& ms, const Homographyd& h_gt, std::span<const double> thresholds) {
  std::vector<double> errors;
  errors.reserve(ms.size());
  for (const Match& m : ms.matches) errors.push_back(reprojection_error(h_gt, m.point_a, m.point_b));
  return score(errors, thresholds);
}

MMAResult mma(const MatchSet& ms, std::span<const Keypoint> kps_a, std::span<const Keypoint> kps_b,
              const Homographyd& h_gt, std::span<const double> thresholds) {
  std::vector<double> errors;
  errors.reserve(ms.size());
  for (const Match& m : ms.matches) {
    if (m.index_a < 0 || m.index_b < 0 || static_cast<std::size_t>(m.index_a) >= kps_a.size() ||
        static_cast<std::size_t>(m.index_b) >= kps_b.size())
      fail(ErrorCode::InvalidArgument, "match index outside its keypoint list");
    const Keypoint& a = kps_a[m.index_a];
    const Keypoint& b = kps_b[m.index_b];
    errors.push_back(reprojection_error(h_gt, Vec2(a.x, a.y), Vec2(b.x, b.y)));
  }
  return score(errors, thresholds);
}

double rotation_error(const Rotationd& r_hat, const Rotationd& r_gt) {
  const double c = ((r_hat.matrix() * r_gt.matrix().transpose()).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

double translation_error(const Vec3& t_hat, const Vec3& t_gt) { return (t_hat - t_gt).norm(); }

// ---------------------------------------------------------------------------
// Aggregates

namespace {

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Json stat_or_null(const std::vector<double>& v, double (*f)(const std::vector<double>&)) {
  return v.empty() ? Json(nullptr) : Json(f(v));
}

double median_of(const std::vector<double>& v) { return median(v); }

std::vector<double> thresholds_of(const Json& parameters) {
  std::vector<double> t;
  for (const Json& v : parameters.at("thresholds")) t.push_back(v.get<double>());
  return t;
}

Json mma_aggregate(const Json& records, const Json& parameters) {
  const std::size_t nt = thresholds_of(parameters).size();
  std::vector<double> sum(nt, 0.0);
  std::map<double, std::pair<std::size_t, std::vector<double>>> per_theta;
  std::size_t empty = 0;
  for (const Json& r : records) {
    const Json& acc = r.at("accuracy");
    if (acc.size() != nt) fail(ErrorCode::FormatError, "record accuracy length differs from thresholds");
    auto& bucket = per_theta[r.at("theta_deg").get<double>()];
    if (bucket.second.empty()) bucket.second.assign(nt, 0.0);
    ++bucket.first;
    for (std::size_t t = 0; t < nt; ++t) {
      sum[t] += acc[t].get<double>();
      bucket.second[t] += acc[t].get<double>();
    }
    empty += r.at("empty").get<bool>();
  }
  const std::size_t n = records.size();
  Json overall = Json::array();
  for (std::size_t t = 0; t < nt; ++t) overall.push_back(n ? sum[t] / static_cast<double>(n) : 0.0);
  Json thetas = Json::array();
  for (const auto& [theta, bucket] : per_theta) {
    Json m = Json::array();
    for (std::size_t t = 0; t < nt; ++t) m.push_back(bucket.second[t] / static_cast<double>(bucket.first));
    thetas.push_back(Json{{"theta_deg", theta}, {"pairs", bucket.first}, {"mma", m}});
  }
  return Json{{"pairs", n}, {"empty_pairs", empty}, {"mma", overall}, {"per_theta", thetas}};
}

Json pose_stats(const std::vector<const Json*>& records) {
  std::vector<double> ang, trans;
  std::size_t failures = 0;
  for (const Json* r : records) {
    if (!r->at("ok").get<bool>()) {
      ++failures;
      continue;
    }
    ang.push_back(r->at("angular_error_deg").get<double>());
    trans.push_back(r->at("translation_error_m").get<double>());
  }
  const std::size_t n = records.size();
  return Json{{"pairs", n},
              {"failures", failures},
              {"failure_rate", n ? static_cast<double>(failures) / static_cast<double>(n) : 0.0},
              {"mean_angular_error_deg", stat_or_null(ang, mean)},
              {"median_angular_error_deg", stat_or_null(ang, median_of)},
              {"mean_translation_error_m", stat_or_null(trans, mean)},
              {"median_translation_error_m", stat_or_null(trans, median_of)}};
}

Json pose_aggregate(const Json& records) {
  std::vector<const Json*> all;
  std::map<std::string, std::vector<const Json*>> by_seq;
  for (const Json& r : records) {
    all.push_back(&r);
    by_seq[r.at("sequence").get<std::string>()].push_back(&r);
  }
  Json agg = pose_stats(all);
  Json seqs = Json::array();
  for (const auto& [name, recs] : by_seq) {
    Json s = pose_stats(recs);
    s["sequence"] = name;
    seqs.push_back(std::move(s));
  }
  agg["per_sequence"] = seqs;
  return agg;
}

Json vpr_aggregate(const Json& records) {
  std::size_t correct = 0, flagged = 0;
  for (const Json& r : records) {
    correct += r.at("correct").get<bool>();
    flagged += r.at("flagged").get<bool>();
  }
  const std::size_t n = records.size();
  return Json{{"queries", n},
              {"correct", correct},
              {"flagged", flagged},
              {"recall", n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0}};
}

}  // namespace

Json recompute_aggregate(const std::string& kind, const Json& records, const Json& parameters) {
  if (!records.is_array()) fail(ErrorCode::FormatError, "report records must be an array");
  try {
    if (kind == "mma") return mma_aggregate(records, parameters);
    if (kind == "pose") return pose_aggregate(records);
    if (kind == "vpr") return vpr_aggregate(records);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, std::string("malformed report record: ") + e.what());
  }
  fail(ErrorCode::FormatError, "unknown report kind '" + kind + "'");
}

Json to_json(const EvalReport& r) {
  return Json{{"schema", "orthomatch.eval_report"},
              {"version", kReportVersion},
              {"kind", r.kind},
              {"tool_version", r.tool_version},
              {"seed", r.seed},
              {"config", r.config},
              {"parameters", r.parameters},
              {"records", r.records},
              {"aggregate", r.aggregate}};
}

EvalReport report_from_json(const Json& j) {
  EvalReport r;
  try {
    if (j.at("schema").get<std::string>() != "orthomatch.eval_report")
      fail(ErrorCode::FormatError, "not an evaluation report");
    if (j.at("version").get<int>() != kReportVersion) fail(ErrorCode::FormatError, "unsupported report version");
    r.kind = j.at("kind").get<std::string>();
    r.tool_version = j.at("tool_version").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.at("config");
    r.parameters = j.at("parameters");
    r.records = j.at("records");
    r.aggregate = j.at("aggregate");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, std::string("malformed report: ") + e.what());
  }
  if (recompute_aggregate(r.kind, r.records, r.parameters) != r.aggregate)
    fail(ErrorCode::InvariantError, "report aggregate does not match its records");
  return r;
}

EvalReport load_report(const std::filesystem::path& path) { return report_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Protocols

EvalReport eval_mma(const CorpusManifest& corpus, const std::filesystem::path& corpus_dir, const PipelineConfig& cfg_in,
                    const MMAConfig& mma_cfg) {
  mma_cfg.validate();
  PipelineConfig cfg = cfg_in;
  cfg.ransac_model = RansacModel::None;  // scored before verification
  cfg.validate();

  const std::size_t n = corpus.entries.size();
  std::vector<Json> records(n);
  parallel_for(n, cfg.effective_workers(), [&](std::size_t i) {
    const CorpusEntry& e = corpus.entries[i];
    const Image a = read_png(corpus_dir / e.image_a), b = read_png(corpus_dir / e.image_b);
    ViewInput va, vb;
    va.id = e.id + "_a", va.image = &a;
    vb.id = e.id + "_b", vb.image = &b;
    const PipelineResult res = run_pipeline(va, vb, cfg);
    const MMAResult m = mma(res.matches, e.spec.h_gt, mma_cfg.thresholds);
    records[i] = Json{{"id", e.id},
                      {"theta_deg", e.spec.transform.theta_deg},
                      {"keypoints", Json::array({res.keypoints_a, res.keypoints_b})},
                      {"matches", m.matches},
                      {"empty", m.empty},
                      {"accuracy", m.accuracy}};
  });

  EvalReport report;
  report.kind = "mma";
  report.config = to_json(cfg);
  report.parameters = Json{{"thresholds", mma_cfg.thresholds}, {"corpus_seed", corpus.seed}};
  report.seed = cfg.seed;
  for (Json& r : records) report.records.push_back(std::move(r));
  report.aggregate = recompute_aggregate(report.kind, report.records, report.parameters);
  return report;
}

EvalReport eval_pose_protocol(const PoseDataset& ds, const PipelineConfig& cfg_in) {
  PipelineConfig cfg = cfg_in;
  cfg.ransac_model = RansacModel::Pose3d;
  cfg.validate();

  struct Job {
    const PoseView* rep;
    const PoseView* cand;
  };
  std::vector<Job> jobs;
  for (const PoseGroup& g : ds.groups) {
    const PoseView& rep = ds.view(g.representative);
    for (const std::string& c : g.candidates) jobs.push_back({&rep, &ds.view(c)});
  }
  auto input = [](const PoseView& v) {
    ViewInput in;
    in.id = v.id;
    in.image = &v.image;
    in.depth = &v.depth;
    in.k = v.k;
    in.roi = v.roi;
    return in;
  };

  std::vector<Json> records(jobs.size());
  parallel_for(jobs.size(), cfg.effective_workers(), [&](std::size_t i) {
    const PoseView& rep = *jobs[i].rep;
    const PoseView& cand = *jobs[i].cand;
    const PipelineResult res = run_pipeline(input(rep), input(cand), cfg);
    Json r{{"sequence", cand.sequence}, {"representative", rep.id}, {"candidate", cand.id},
           {"matches", res.matches.size()}};
    if (res.ransac) {
      const Posed gt = cand.camera_from_world * rep.camera_from_world.inverse();
      const Posed& est = res.ransac->pose();
      r["ok"] = true;
      r["inliers"] = res.ransac->inlier_count;
      r["angular_error_deg"] = rotation_error(est.rotation, gt.rotation);
      r["translation_error_m"] = translation_error(est.translation, gt.translation);
    } else {
      r["ok"] = false;
      r["inliers"] = 0;
      r["angular_error_deg"] = nullptr;
      r["translation_error_m"] = nullptr;
      r["failure"] = res.ransac_failure;
    }
    records[i] = std::move(r);
  });

  EvalReport report;
  report.kind = "pose";
  report.config = to_json(cfg);
  report.parameters = Json::object();
  report.seed = cfg.seed;
  for (Json& r : records) report.records.push_back(std::move(r));
  report.aggregate = recompute_aggregate(report.kind, report.records, report.parameters);
  return report;
}

EvalReport eval_vpr(std::span<const PlaceView> queries, std::span<const PlaceView> references, const VPRConfig& vpr,
                    const PipelineConfig& cfg) {
  vpr.validate();
  cfg.validate();
  if (cfg.ransac_model == RansacModel::None)
    fail(ErrorCode::ConfigError, "place recognition ranks by verified inliers; ransac.model must not be none");

  struct Job {
    std::size_t query, ref;
    double distance;
  };
  std::vector<std::vector<std::size_t>> job_ids(queries.size());
  std::vector<Job> jobs;
  for (std::size_t q = 0; q < queries.size(); ++q)
    for (std::size_t r = 0; r < references.size(); ++r) {
      const double d = (references[r].xy - queries[q].xy).norm();
      if (d <= vpr.prior_radius_m) {
        job_ids[q].push_back(jobs.size());
        jobs.push_back({q, r, d});
      }
    }
  auto input = [](const PlaceView& v) {
    ViewInput in;
    in.id = v.id;
    in.image = &v.image;
    in.ortho = v.ipm;
    return in;
  };
  std::vector<int> inliers(jobs.size(), 0);
  parallel_for(jobs.size(), cfg.effective_workers(), [&](std::size_t i) {
    inliers[i] = run_pipeline(input(queries[jobs[i].query]), input(references[jobs[i].ref]), cfg).inlier_count();
  });

  EvalReport report;
  report.kind = "vpr";
  report.config = to_json(cfg);
  report.parameters = Json{{"prior_radius_m", vpr.prior_radius_m}, {"localization_radius_m", vpr.localization_radius_m}};
  report.seed = cfg.seed;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    Json scores = Json::array();
    const Job* best = nullptr;
    int best_inliers = -1;
    for (std::size_t id : job_ids[q]) {
      const Job& job = jobs[id];
      const PlaceView& ref = references[job.ref];
      scores.push_back(Json::array({ref.id, inliers[id], job.distance}));
      const bool better = !best || inliers[id] > best_inliers ||
                          (inliers[id] == best_inliers &&
                           (job.distance < best->distance ||
                            (job.distance == best->distance && ref.id < references[best->ref].id)));
      if (better) best = &job, best_inliers = inliers[id];
    }
    Json r{{"query", queries[q].id}, {"candidates", job_ids[q].size()}, {"scores", scores}};
    if (best) {
      r["retrieved"] = references[best->ref].id;
      r["inliers"] = best_inliers;
      r["distance_m"] = best->distance;
      r["correct"] = best->distance <= vpr.localization_radius_m;
      r["flagged"] = false;
    } else {
      r["retrieved"] = nullptr;
      r["inliers"] = 0;
      r["distance_m"] = nullptr;
      r["correct"] = false;
      r["flagged"] = true;
    }
    report.records.push_back(std::move(r));
  }
  report.aggregate = recompute_aggregate(report.kind, report.records, report.parameters);
  return report;
}

std::string mma_curves_csv(const EvalReport& report) {
  if (report.kind != "mma") fail(ErrorCode::InvalidArgument, "curves are only defined for MMA reports");
  const std::vector<double> t = thresholds_of(report.parameters);
  std::ostringstream out;
  out << "threshold_px,theta_deg,mma\n";
  auto num = [](double v) {
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof(buf), v).ptr);
  };
  auto row = [&](double tau, const std::string& theta, const Json& v) {
    out << num(tau) << ',' << theta << ',' << num(v.get<double>()) << '\n';
  };
  const Json& mmas = report.aggregate.at("mma");
  for (std::size_t i = 0; i < t.size(); ++i) row(t[i], "all", mmas[i]);
  for (const Json& g : report.aggregate.at("per_theta"))
    for (std::size_t i = 0; i < t.size(); ++i) row(t[i], num(g.at("theta_deg").get<double>()), g.at("mma")[i]);
  return out.str();
}

}  // namespace orthomatch
