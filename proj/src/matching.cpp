#include "orthomatch/matching.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <tuple>

#include "orthomatch/random.hpp"

namespace orthomatch {

MatchSet match_mnn(const DescriptorSet& a, const DescriptorSet& b) {
  MatchSet out;
  out.set_a = a.id;
  out.set_b = b.id;
  if (a.empty() || b.empty()) return out;
  if (a.dimension() != b.dimension())
    fail(ErrorCode::DimensionMismatch, "descriptor dimensions differ: " + std::to_string(a.dimension()) + " vs " +
                                           std::to_string(b.dimension()));

  const Eigen::MatrixXd da = a.vectors.cast<double>();
  const Eigen::MatrixXd db = b.vectors.cast<double>();
  const Eigen::VectorXd na = da.colwise().squaredNorm().transpose();
  const Eigen::VectorXd nb = db.colwise().squaredNorm().transpose();
  // Squared distances |a|^2 + |b|^2 - 2 a.b, one GEMM for all cross terms.
  Eigen::MatrixXd dist = -2.0 * (da.transpose() * db);
  dist.colwise() += na;
  dist.rowwise() += nb.transpose();

  const Eigen::Index rows = dist.rows(), cols = dist.cols();
  std::vector<Eigen::Index> best_b(rows, 0), best_a(cols, 0);
  for (Eigen::Index j = 0; j < cols; ++j) {
    Eigen::Index arg = 0;
    double best = dist(0, j);
    for (Eigen::Index i = 1; i < rows; ++i)
      if (dist(i, j) < best) best = dist(i, j), arg = i;
    best_a[j] = arg;
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    Eigen::Index arg = 0;
    double best = dist(i, 0);
    for (Eigen::Index j = 1; j < cols; ++j)
      if (dist(i, j) < best) best = dist(i, j), arg = j;
    best_b[i] = arg;
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index j = best_b[i];
    if (best_a[j] != i) continue;
    Match m;
    m.index_a = static_cast<int>(i);
    m.index_b = static_cast<int>(j);
    m.distance = (da.col(i) - db.col(j)).norm();
    m.head = a.head == b.head ? a.head : HeadTag::External;
    m.point_a = Vec2(a.keypoints[i].x, a.keypoints[i].y);
    m.point_b = Vec2(b.keypoints[j].x, b.keypoints[j].y);
    out.matches.push_back(m);
  }
  return out;
}

MatchSet ensemble(const MatchSet& vanilla, const MatchSet& robust, const EnsembleParams& params) {
  if (!(params.keep_fraction > 0 && params.keep_fraction <= 1))
    fail(ErrorCode::ConfigOutOfRange, "keep_fraction must lie in (0, 1]");
  std::vector<Match> all;
  all.reserve(vanilla.size() + robust.size());
  all.insert(all.end(), vanilla.matches.begin(), vanilla.matches.end());
  all.insert(all.end(), robust.matches.begin(), robust.matches.end());
  std::stable_sort(all.begin(), all.end(), [](const Match& x, const Match& y) {
    return std::make_tuple(x.distance, static_cast<int>(x.head), x.index_a) <
           std::make_tuple(y.distance, static_cast<int>(y.head), y.index_a);
  });

  const double r2 = params.duplicate_radius_px * params.duplicate_radius_px;
  std::vector<Match> unique;
  unique.reserve(all.size());
  for (const Match& m : all) {
    const bool duplicate = std::any_of(unique.begin(), unique.end(), [&](const Match& kept) {
      return (kept.point_a - m.point_a).squaredNorm() <= r2 && (kept.point_b - m.point_b).squaredNorm() <= r2;
    });
    if (!duplicate) unique.push_back(m);
  }
  const auto keep = static_cast<std::size_t>(std::ceil(params.keep_fraction * static_cast<double>(unique.size()) - 1e-9));
  unique.resize(std::min(keep, unique.size()));

  MatchSet out;
  out.set_a = !vanilla.set_a.empty() ? vanilla.set_a : robust.set_a;
  out.set_b = !vanilla.set_b.empty() ? vanilla.set_b : robust.set_b;
  out.matches = std::move(unique);
  return out;
}

double symmetric_transfer_error(const Homographyd& h, const Vec2& a, const Vec2& b) {
  const Mat3& m = h.matrix();
  const Vec3 fa = m * a.homogeneous();
  if (std::abs(fa.z()) < 1e-12) return std::numeric_limits<double>::infinity();
  const Eigen::PartialPivLU<Mat3> lu(m);
  const Vec3 bb = lu.solve(b.homogeneous());
  if (std::abs(bb.z()) < 1e-12) return std::numeric_limits<double>::infinity();
  return std::max((fa.head<2>() / fa.z() - b).norm(), (bb.head<2>() / bb.z() - a).norm());
}

namespace {

int adaptive_iterations(double inlier_ratio, int sample_size, double confidence, int max_iters) {
  const double good = std::pow(inlier_ratio, sample_size);
  if (good >= 1.0 - 1e-12) return 1;
  if (good <= 0) return max_iters;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - good);
  if (!std::isfinite(n) || n >= max_iters) return max_iters;
  return std::max(1, static_cast<int>(std::ceil(n)));
}

// Draws `k` distinct indices in [0, n).
template <std::size_t K>
std::array<std::size_t, K> draw_sample(Rng& rng, std::size_t n) {
  std::array<std::size_t, K> s{};
  for (std::size_t i = 0; i < K; ++i) {
    while (true) {
      const std::size_t v = rng.index(n);
      if (std::find(s.begin(), s.begin() + i, v) == s.begin() + i) {
        s[i] = v;
        break;
      }
    }
  }
  return s;
}

void validate_params(const RansacParams& p) {
  if (p.max_iters < 1) fail(ErrorCode::ConfigOutOfRange, "max_iters must be >= 1");
  if (!(p.confidence > 0 && p.confidence < 1)) fail(ErrorCode::ConfigOutOfRange, "confidence must lie in (0, 1)");
}

int count_homography_inliers(const Homographyd& h, std::span<const PointPaird> pairs, double thr,
                             std::vector<std::uint8_t>& flags) {
  flags.assign(pairs.size(), 0);
  int count = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (symmetric_transfer_error(h, pairs[i].source, pairs[i].target) < thr) flags[i] = 1, ++count;
  return count;
}

int count_pose_inliers(const Posed& pose, std::span<const Point3Pair> pairs, double thr,
                       std::vector<std::uint8_t>& flags) {
  flags.assign(pairs.size(), 0);
  int count = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if ((pose * pairs[i].a - pairs[i].b).norm() < thr) flags[i] = 1, ++count;
  return count;
}

template <typename T>
std::vector<T> select(std::span<const T> items, const std::vector<std::uint8_t>& flags) {
  std::vector<T> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (flags[i]) out.push_back(items[i]);
  return out;
}

}  // namespace

RansacResult ransac_homography(std::span<const PointPaird> pairs, const RansacParams& params) {
  validate_params(params);
  if (pairs.size() < 4) fail(ErrorCode::InsufficientMatches, "homography RANSAC needs at least 4 matches");
  const std::size_t n = pairs.size();
  Rng rng(params.seed);

  RansacResult best{Homographyd::identity(), {}, 0, 0};
  std::vector<std::uint8_t> flags;
  int needed = params.max_iters;
  int iter = 0;
  while (iter < needed) {
    ++iter;
    const auto idx = draw_sample<4>(rng, n);
    const std::array<PointPaird, 4> sample{pairs[idx[0]], pairs[idx[1]], pairs[idx[2]], pairs[idx[3]]};
    Homographyd h;
    try {
      h = homography_from_point_pairs<double>(std::span<const PointPaird>(sample));
    } catch (const Error&) {
      continue;
    }
    const int count = count_homography_inliers(h, pairs, params.threshold_px, flags);
    if (count > best.inlier_count) {
      best.model = h;
      best.inliers = flags;
      best.inlier_count = count;
      needed = std::min(needed, adaptive_iterations(double(count) / double(n), 4, params.confidence, params.max_iters));
      needed = std::max(needed, iter);
    }
  }
  best.iterations_run = iter;
  if (best.inlier_count < 4) fail(ErrorCode::NoModelFound, "no hypothesis reached 4 inliers");

  // Refit on the inliers until the set stops changing; a single refit can
  // keep the pull of a borderline outlier that the recount then drops.
  for (int round = 0; round < 10; ++round) {
    Homographyd refit;
    try {
      refit = homography_from_point_pairs<double>(select(pairs, best.inliers));
    } catch (const Error&) {
      break;
    }
    const int count = count_homography_inliers(refit, pairs, params.threshold_px, flags);
    if (count < 4) break;
    const bool stable = flags == best.inliers;
    best.model = refit;
    best.inliers = flags;
    best.inlier_count = count;
    if (stable) break;
  }
  return best;
}

RansacResult ransac_homography(const MatchSet& ms, const RansacParams& params) {
  std::vector<PointPaird> pairs;
  pairs.reserve(ms.size());
  for (const Match& m : ms.matches) pairs.push_back({m.point_a, m.point_b});
  return ransac_homography(std::span<const PointPaird>(pairs), params);
}

Posed rigid_transform(std::span<const Point3Pair> pairs) {
  if (pairs.size() < 3) fail(ErrorCode::InsufficientPoints, "rigid alignment needs 3 point pairs");
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (const auto& p : pairs) ca += p.a, cb += p.b;
  ca /= double(pairs.size());
  cb /= double(pairs.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pairs) cov += (p.b - cb) * (p.a - ca).transpose();
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 fix = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) fix(2, 2) = -1;
  Mat3 r = svd.matrixU() * fix * svd.matrixV().transpose();
  // Re-orthonormalize against accumulated round-off.
  const Eigen::JacobiSVD<Mat3> clean(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  r = clean.matrixU() * clean.matrixV().transpose();
  Posed pose;
  pose.rotation = Rotationd::from_matrix(r);
  pose.translation = cb - r * ca;
  return pose;
}

RansacResult ransac_pose_3d(std::span<const Point3Pair> pairs, const RansacParams& params) {
  validate_params(params);
  if (pairs.size() < 3) fail(ErrorCode::InsufficientMatches, "pose RANSAC needs at least 3 matches with depth");
  const std::size_t n = pairs.size();
  Rng rng(params.seed);

  auto collinear = [](const Vec3& p, const Vec3& q, const Vec3& r) {
    const Vec3 u = q - p, v = r - p;
    const double scale = std::max(u.squaredNorm(), v.squaredNorm());
    return !(u.cross(v).squaredNorm() > 1e-12 * scale * scale) || !(scale > 1e-18);
  };

  RansacResult best{Posed{}, {}, 0, 0};
  std::vector<std::uint8_t> flags;
  int needed = params.max_iters;
  int iter = 0;
  bool any_sample = false;
  while (iter < needed) {
    ++iter;
    const auto idx = draw_sample<3>(rng, n);
    const std::array<Point3Pair, 3> sample{pairs[idx[0]], pairs[idx[1]], pairs[idx[2]]};
    if (collinear(sample[0].a, sample[1].a, sample[2].a) || collinear(sample[0].b, sample[1].b, sample[2].b))
      continue;
    any_sample = true;
    const Posed pose = rigid_transform(sample);
    const int count = count_pose_inliers(pose, pairs, params.threshold_m, flags);
    if (count > best.inlier_count) {
      best.model = pose;
      best.inliers = flags;
      best.inlier_count = count;
      needed = std::min(needed, adaptive_iterations(double(count) / double(n), 3, params.confidence, params.max_iters));
      needed = std::max(needed, iter);
    }
  }
  best.iterations_run = iter;
  if (!any_sample) fail(ErrorCode::DegenerateSample, "every drawn 3-point sample was collinear");
  if (best.inlier_count < 3) fail(ErrorCode::NoModelFound, "no hypothesis reached 3 inliers");

  for (int round = 0; round < 10; ++round) {
    const Posed refit = rigid_transform(select(pairs, best.inliers));
    const int count = count_pose_inliers(refit, pairs, params.threshold_m, flags);
    if (count < 3) break;
    const bool stable = flags == best.inliers;
    best.model = refit;
    best.inliers = flags;
    best.inlier_count = count;
    if (stable) break;
  }
  return best;
}

RansacResult ransac_pose_3d(const MatchSet& ms, const DepthMap& depth_a, const DepthMap& depth_b,
                            const Intrinsicsd& k_a, const Intrinsicsd& k_b, const RansacParams& params) {
  std::vector<Point3Pair> pairs;
  std::vector<std::size_t> origin;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const Match& m = ms.matches[i];
    double za, zb;
    if (!depth_a.sample(m.point_a.x(), m.point_a.y(), za) || !depth_b.sample(m.point_b.x(), m.point_b.y(), zb)) continue;
    pairs.push_back({za * k_a.ray(m.point_a.x(), m.point_a.y()), zb * k_b.ray(m.point_b.x(), m.point_b.y())});
    origin.push_back(i);
  }
  RansacResult r = ransac_pose_3d(std::span<const Point3Pair>(pairs), params);
  std::vector<std::uint8_t> flags(ms.size(), 0);
  for (std::size_t i = 0; i < origin.size(); ++i) flags[origin[i]] = r.inliers[i];
  r.inliers = std::move(flags);
  return r;
}

}  // namespace orthomatch
