#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "oracles.hpp"
#include "orthomatch/matching.hpp"
#include "orthomatch/random.hpp"

using namespace orthomatch;

namespace {

DescriptorSet make_set(const Eigen::MatrixXf& vectors, HeadTag head = HeadTag::Vanilla) {
  DescriptorSet s;
  s.vectors = vectors;
  s.head = head;
  for (Eigen::Index i = 0; i < vectors.cols(); ++i) {
    Keypoint kp;
    kp.x = static_cast<float>(i);
    kp.y = static_cast<float>(2 * i);
    s.keypoints.push_back(kp);
  }
  return s;
}

Eigen::MatrixXf random_unit_columns(Rng& rng, int d, int n) {
  Eigen::MatrixXf m(d, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < d; ++i) m(i, j) = static_cast<float>(rng.normal());
    m.col(j).normalize();
  }
  return m;
}

Match make_match(int ia, double distance, HeadTag head, Vec2 pa, Vec2 pb) {
  Match m;
  m.index_a = ia;
  m.index_b = ia;
  m.distance = distance;
  m.head = head;
  m.point_a = pa;
  m.point_b = pb;
  return m;
}

MatchSet set_of(std::vector<Match> ms) {
  MatchSet s;
  s.matches = std::move(ms);
  return s;
}

// Random matches with well-separated endpoints so no two collapse.
MatchSet random_matches(Rng& rng, int n, HeadTag head, double x_offset) {
  MatchSet s;
  for (int i = 0; i < n; ++i) {
    const double d = std::round(rng.uniform(0, 2) * 20) / 20;  // plenty of ties
    s.matches.push_back(make_match(i, d, head, Vec2(x_offset + 3 * i, 0), Vec2(x_offset + 3 * i, 1)));
  }
  return s;
}

struct Scene {
  Mat3 h;
  std::vector<PointPaird> pairs;
  std::vector<bool> truth;
};

Scene noisy_scene(std::uint64_t seed, int inliers, int outliers, double sigma) {
  Rng rng(seed);
  Scene s;
  s.h = oracle::random_homography(rng, 640, 480);
  for (int i = 0; i < inliers; ++i) {
    const Vec2 p(rng.uniform(0, 640), rng.uniform(0, 480));
    s.pairs.push_back({p, oracle::apply(s.h, p) + Vec2(rng.normal(0, sigma), rng.normal(0, sigma))});
    s.truth.push_back(true);
  }
  for (int i = 0; i < outliers; ++i) {
    s.pairs.push_back({Vec2(rng.uniform(0, 640), rng.uniform(0, 480)), Vec2(rng.uniform(0, 640), rng.uniform(0, 480))});
    s.truth.push_back(false);
  }
  // Interleave deterministically.
  for (std::size_t i = s.pairs.size() - 1; i > 0; --i) {
    const std::size_t j = rng.index(i + 1);
    std::swap(s.pairs[i], s.pairs[j]);
    const bool t = s.truth[i];
    s.truth[i] = s.truth[j];
    s.truth[j] = t;
  }
  return s;
}

Vec3 random_point(Rng& rng) { return Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(2, 6)); }

double angle_deg(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a * b.transpose()).trace() - 1) / 2, -1.0, 1.0);
  return std::acos(c) * 180 / std::numbers::pi;
}

}  // namespace

TEST_CASE("match_mnn: identical sets match one to one") {
  Rng rng(1);
  const Eigen::MatrixXf v = random_unit_columns(rng, 128, 5);
  const MatchSet ms = match_mnn(make_set(v), make_set(v));
  REQUIRE(ms.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(ms.matches[i].index_a == i);
    CHECK(ms.matches[i].index_b == i);
    CHECK(ms.matches[i].distance == 0.0);
  }
}

TEST_CASE("match_mnn: basis vector example") {
  Eigen::MatrixXf a = Eigen::MatrixXf::Zero(128, 2), b = Eigen::MatrixXf::Zero(128, 2);
  a(0, 0) = 1;  // e1
  a(1, 1) = 1;  // e2
  b(1, 0) = 1;  // e2
  b(2, 1) = 1;  // e3
  const MatchSet ms = match_mnn(make_set(a), make_set(b));
  const auto ref = oracle::mutual_nearest(a.cast<double>(), b.cast<double>());
  REQUIRE(ms.size() == 1);
  REQUIRE(ref.size() == 1);
  CHECK(ms.matches[0].index_a == 1);
  CHECK(ms.matches[0].index_b == 0);
  CHECK(ref[0].i == 1);
  CHECK(ref[0].j == 0);
}

TEST_CASE("match_mnn agrees with the O(N^2) reference") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    // Low dimension makes near ties common.
    const int d = trial % 2 ? 128 : 4;
    const Eigen::MatrixXf a = random_unit_columns(rng, d, 50), b = random_unit_columns(rng, d, 50);
    const MatchSet ms = match_mnn(make_set(a), make_set(b));
    const auto ref = oracle::mutual_nearest(a.cast<double>(), b.cast<double>());
    REQUIRE(ms.size() == ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) {
      CHECK(ms.matches[k].index_a == ref[k].i);
      CHECK(ms.matches[k].index_b == ref[k].j);
      CHECK(ms.matches[k].distance == doctest::Approx(ref[k].distance).epsilon(1e-12));
    }
  }
}

TEST_CASE("match_mnn: exact ties resolve to the lowest index") {
  Eigen::MatrixXf a = Eigen::MatrixXf::Zero(8, 1), b = Eigen::MatrixXf::Zero(8, 3);
  a(0, 0) = 1;
  b(1, 0) = 1;
  b(2, 1) = 1;
  b(3, 2) = 1;
  const MatchSet ms = match_mnn(make_set(a), make_set(b));
  REQUIRE(ms.size() == 1);
  CHECK(ms.matches[0].index_b == 0);
}

TEST_CASE("match_mnn: symmetry, endpoints, errors") {
  Rng rng(3);
  const Eigen::MatrixXf a = random_unit_columns(rng, 16, 60), b = random_unit_columns(rng, 16, 45);
  const MatchSet ab = match_mnn(make_set(a), make_set(b));
  const MatchSet ba = match_mnn(make_set(b), make_set(a));
  std::set<std::pair<int, int>> s1, s2;
  for (const Match& m : ab.matches) s1.insert({m.index_a, m.index_b});
  for (const Match& m : ba.matches) s2.insert({m.index_b, m.index_a});
  CHECK(s1 == s2);
  for (const Match& m : ab.matches) {
    CHECK(m.point_a == Vec2(m.index_a, 2 * m.index_a));
    CHECK(m.point_b == Vec2(m.index_b, 2 * m.index_b));
  }
  // Each index at most once.
  std::set<int> ia, ib;
  for (const Match& m : ab.matches) {
    CHECK(ia.insert(m.index_a).second);
    CHECK(ib.insert(m.index_b).second);
  }

  CHECK(match_mnn(make_set(Eigen::MatrixXf(128, 0)), make_set(a)).empty());
  try {
    match_mnn(make_set(a), make_set(random_unit_columns(rng, 32, 3)));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("ensemble: hand-sorted examples") {
  const MatchSet v = set_of({make_match(0, 0.1, HeadTag::Vanilla, {0, 0}, {0, 0}),
                             make_match(1, 0.9, HeadTag::Vanilla, {10, 0}, {10, 0})});
  const MatchSet r = set_of({make_match(0, 0.2, HeadTag::Robust, {20, 0}, {20, 0}),
                             make_match(1, 0.8, HeadTag::Robust, {30, 0}, {30, 0})});
  const MatchSet e = ensemble(v, r);
  REQUIRE(e.size() == 2);
  CHECK(e.matches[0].distance == 0.1);
  CHECK(e.matches[1].distance == 0.2);

  const MatchSet only = ensemble(v, MatchSet{});
  REQUIRE(only.size() == 1);
  CHECK(only.matches[0].distance == 0.1);
  CHECK(ensemble(MatchSet{}, MatchSet{}).empty());

  MatchSet five = v;
  five.matches.push_back(make_match(2, 0.5, HeadTag::Vanilla, {40, 0}, {40, 0}));
  CHECK(ensemble(five, r).size() == 3);
}

TEST_CASE("ensemble: duplicates across heads collapse to the closer match") {
  const MatchSet v = set_of({make_match(0, 0.3, HeadTag::Vanilla, {5, 5}, {7, 7})});
  const MatchSet r = set_of({make_match(4, 0.2, HeadTag::Robust, {5.3, 5}, {7, 7.2}),
                             make_match(5, 0.25, HeadTag::Robust, {5.3, 5}, {9, 9})});
  EnsembleParams keep_all;
  keep_all.keep_fraction = 1.0;
  const MatchSet e = ensemble(v, r, keep_all);
  REQUIRE(e.size() == 2);
  CHECK(e.matches[0].head == HeadTag::Robust);
  CHECK(e.matches[0].index_a == 4);
  CHECK(e.matches[1].index_a == 5);
}

TEST_CASE("ensemble: equal distances order by head then index") {
  const MatchSet v = set_of({make_match(3, 0.5, HeadTag::Vanilla, {0, 0}, {0, 0}),
                             make_match(1, 0.5, HeadTag::Vanilla, {10, 0}, {10, 0})});
  const MatchSet r = set_of({make_match(0, 0.5, HeadTag::Robust, {20, 0}, {20, 0})});
  EnsembleParams keep_all;
  keep_all.keep_fraction = 1.0;
  const MatchSet e = ensemble(v, r, keep_all);
  REQUIRE(e.size() == 3);
  CHECK(e.matches[0].index_a == 1);
  CHECK(e.matches[1].index_a == 3);
  CHECK(e.matches[2].head == HeadTag::Robust);
}

TEST_CASE("ensemble: retained distances never exceed discarded ones") {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const MatchSet v = random_matches(rng, static_cast<int>(rng.index(30)), HeadTag::Vanilla, 0);
    const MatchSet r = random_matches(rng, static_cast<int>(rng.index(30)), HeadTag::Robust, 1000);
    EnsembleParams p;
    p.keep_fraction = rng.uniform(0.05, 1.0);
    const MatchSet e = ensemble(v, r, p);
    const std::size_t total = v.size() + r.size();
    const auto expected = static_cast<std::size_t>(std::ceil(p.keep_fraction * total - 1e-9));
    REQUIRE(e.size() == std::min(expected, total));
    double kept_max = -1;
    std::multiset<double> kept;
    for (const Match& m : e.matches) kept_max = std::max(kept_max, m.distance), kept.insert(m.distance);
    std::multiset<double> all;
    for (const auto* s : {&v, &r})
      for (const Match& m : s->matches) all.insert(m.distance);
    for (double d : kept) all.erase(all.find(d));
    for (double d : all) CHECK(kept_max <= d);
    for (std::size_t i = 1; i < e.size(); ++i) CHECK(e.matches[i - 1].distance <= e.matches[i].distance);
  }
  EnsembleParams bad;
  bad.keep_fraction = 0;
  CHECK_THROWS_AS(ensemble(MatchSet{}, MatchSet{}, bad), Error);
}

TEST_CASE("symmetric_transfer_error") {
  const Homographyd h = Homographyd::translation(3, 4);
  CHECK(symmetric_transfer_error(h, Vec2(1, 1), Vec2(4, 5)) < 1e-12);
  CHECK(symmetric_transfer_error(h, Vec2(1, 1), Vec2(4, 6)) == doctest::Approx(1.0));
  // Under scaling the two directions differ; the larger one is reported.
  CHECK(symmetric_transfer_error(Homographyd::scaling(2, 2), Vec2(1, 0), Vec2(3, 0)) == doctest::Approx(1.0));
}

TEST_CASE("ransac_homography: exact correspondences") {
  Rng rng(5);
  const Mat3 truth = oracle::random_homography(rng, 640, 480);
  std::vector<PointPaird> pairs;
  for (int i = 0; i < 40; ++i) {
    const Vec2 p(rng.uniform(0, 640), rng.uniform(0, 480));
    pairs.push_back({p, oracle::apply(truth, p)});
  }
  const RansacResult r = ransac_homography(std::span<const PointPaird>(pairs), RansacParams{});
  CHECK(r.inlier_count == 40);
  CHECK((oracle::frobenius_normalized(r.homography().matrix()) - oracle::frobenius_normalized(truth)).norm() < 1e-6);
  CHECK(r.iterations_run >= 1);
}

TEST_CASE("ransac_homography: half outliers over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = noisy_scene(100 + seed, 30, 30, 0.5);
    RansacParams p;
    p.seed = seed;
    const RansacResult r = ransac_homography(std::span<const PointPaird>(s.pairs), p);
    int true_inliers = 0;
    double worst = 0;
    for (std::size_t i = 0; i < s.pairs.size(); ++i) {
      if (!s.truth[i]) continue;
      true_inliers += r.inliers[i];
      worst = std::max(worst, (apply_homography(r.homography(), s.pairs[i].source) - oracle::apply(s.h, s.pairs[i].source)).norm());
    }
    CAPTURE(seed);
    CHECK(true_inliers >= 28);
    CHECK(worst < 1.5);
  }
}

TEST_CASE("ransac_homography: determinism and inlier consistency") {
  const Scene s = noisy_scene(7, 40, 25, 1.0);
  RansacParams p;
  p.seed = 99;
  const RansacResult a = ransac_homography(std::span<const PointPaird>(s.pairs), p);
  const RansacResult b = ransac_homography(std::span<const PointPaird>(s.pairs), p);
  CHECK(a.homography().matrix() == b.homography().matrix());
  CHECK(a.inliers == b.inliers);
  CHECK(a.iterations_run == b.iterations_run);
  int count = 0;
  for (std::size_t i = 0; i < s.pairs.size(); ++i) {
    const bool ok = symmetric_transfer_error(a.homography(), s.pairs[i].source, s.pairs[i].target) < p.threshold_px;
    CHECK(ok == (a.inliers[i] != 0));
    count += a.inliers[i];
  }
  CHECK(count == a.inlier_count);
  // Clean data stops well before the cap.
  CHECK(a.iterations_run < p.max_iters);
}

TEST_CASE("ransac_homography: errors") {
  std::vector<PointPaird> three(3, PointPaird{{0, 0}, {1, 1}});
  try {
    ransac_homography(std::span<const PointPaird>(three), RansacParams{});
    FAIL("expected InsufficientMatches");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientMatches);
  }
  // All points on one line: every sample is degenerate.
  std::vector<PointPaird> line;
  for (int i = 0; i < 10; ++i) line.push_back({Vec2(i, i), Vec2(2 * i, i)});
  RansacParams p;
  p.max_iters = 50;
  try {
    ransac_homography(std::span<const PointPaird>(line), p);
    FAIL("expected NoModelFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoModelFound);
  }
  p.confidence = 1.0;
  CHECK_THROWS_AS(ransac_homography(std::span<const PointPaird>(line), p), Error);
}

TEST_CASE("rigid_transform") {
  Rng rng(8);
  std::vector<Point3Pair> same;
  for (int i = 0; i < 10; ++i) {
    const Vec3 p = random_point(rng);
    same.push_back({p, p});
  }
  const Posed id = rigid_transform(same);
  CHECK((id.rotation.matrix() - Mat3::Identity()).norm() < 1e-9);
  CHECK(id.translation.norm() < 1e-9);

  const Mat3 r = oracle::rotation_z(30 * std::numbers::pi / 180);
  const Vec3 t(0.1, 0, 0);
  std::vector<Point3Pair> moved;
  for (int i = 0; i < 10; ++i) {
    const Vec3 p = random_point(rng);
    moved.push_back({p, r * p + t});
  }
  const Posed est = rigid_transform(moved);
  CHECK(angle_deg(est.rotation.matrix(), r) * std::numbers::pi / 180 < 1e-6);
  CHECK((est.translation - t).norm() < 1e-6);

  // A mirrored cloud still yields a proper rotation.
  std::vector<Point3Pair> mirrored;
  for (int i = 0; i < 10; ++i) {
    const Vec3 p = random_point(rng);
    mirrored.push_back({p, Vec3(-p.x(), p.y(), p.z())});
  }
  const Posed m = rigid_transform(mirrored);
  CHECK(m.rotation.matrix().determinant() == doctest::Approx(1.0));
  CHECK((m.rotation.matrix().transpose() * m.rotation.matrix() - Mat3::Identity()).norm() < 1e-9);
}

TEST_CASE("ransac_pose_3d: half outliers over 20 seeds") {
  const Mat3 r = oracle::rotation_z(30 * std::numbers::pi / 180);
  const Vec3 t(0.1, 0, 0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(500 + seed);
    std::vector<Point3Pair> pairs;
    for (int i = 0; i < 40; ++i) {
      const Vec3 p = random_point(rng);
      if (i % 2 == 0)
        pairs.push_back({p, r * p + t});
      else
        pairs.push_back({p, random_point(rng)});
    }
    RansacParams p;
    p.seed = seed;
    const RansacResult res = ransac_pose_3d(std::span<const Point3Pair>(pairs), p);
    CAPTURE(seed);
    CHECK(angle_deg(res.pose().rotation.matrix(), r) < 0.5);
    CHECK((res.pose().translation - t).norm() < 0.01);
    CHECK(res.inlier_count >= 20);
    CHECK(res.pose().rotation.matrix().determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("ransac_pose_3d: exact, degenerate and insufficient input") {
  Rng rng(9);
  std::vector<Point3Pair> same;
  for (int i = 0; i < 12; ++i) {
    const Vec3 p = random_point(rng);
    same.push_back({p, p});
  }
  const RansacResult id = ransac_pose_3d(std::span<const Point3Pair>(same), RansacParams{});
  CHECK(id.inlier_count == 12);
  CHECK((id.pose().rotation.matrix() - Mat3::Identity()).norm() < 1e-9);

  std::vector<Point3Pair> line;
  for (int i = 0; i < 8; ++i) line.push_back({Vec3(i, 0, 3), Vec3(i, 0, 3)});
  RansacParams p;
  p.max_iters = 30;
  try {
    ransac_pose_3d(std::span<const Point3Pair>(line), p);
    FAIL("expected DegenerateSample");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateSample);
  }
  try {
    ransac_pose_3d(std::span<const Point3Pair>(line.data(), 2), p);
    FAIL("expected InsufficientMatches");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientMatches);
  }
}

TEST_CASE("ransac_pose_3d on matches with depth") {
  // Fronto-parallel plane at 2 m; frame B is frame A shifted 0.2 m back.
  const Intrinsicsd k(100, 100, 32, 32);
  const Vec3 t(0, 0, 0.2);
  DepthMap da(64, 64), db(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) da.set(x, y, 2.0f), db.set(x, y, 2.2f);
  da.invalidate(5, 5);
  MatchSet ms;
  Match no_depth;
  no_depth.point_a = Vec2(5, 5);
  no_depth.point_b = Vec2(5, 5);
  ms.matches.push_back(no_depth);
  for (int i = 0; i < 30; ++i) {
    Match m;
    m.index_a = m.index_b = i;
    m.point_a = Vec2(8 + (i % 6) * 8, 8 + (i / 6) * 9);
    m.point_b = k.project(2.0 * k.ray(m.point_a.x(), m.point_a.y()) + t);
    ms.matches.push_back(m);
  }
  const RansacResult r = ransac_pose_3d(ms, da, db, k, k, RansacParams{});
  REQUIRE(r.inliers.size() == ms.size());
  CHECK(r.inliers[0] == 0);
  CHECK(r.inlier_count == 30);
  CHECK((r.pose().translation - t).norm() < 1e-3);
  CHECK(angle_deg(r.pose().rotation.matrix(), Mat3::Identity()) < 0.05);
}
