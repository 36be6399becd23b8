#include <doctest.h>

#include <numbers>

#include "oracles.hpp"
#include "orthomatch/geometry.hpp"
#include "orthomatch/random.hpp"

using namespace orthomatch;

namespace {

Vec3 random_unit(Rng& rng) {
  Vec3 v;
  do v = Vec3(rng.normal(), rng.normal(), rng.normal());
  while (v.norm() < 1e-3);
  return v.normalized();
}

void check_rotation(const Mat3& r) {
  CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-9);
  CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-9));
}

double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("align_rotation: +z to +y is a quarter turn about x") {
  const Rotationd r = align_rotation(UnitVector3d(0, 0, 1), UnitVector3d(0, 1, 0));
  CHECK((r * Vec3(0, 0, 1) - Vec3(0, 1, 0)).norm() < 1e-12);
  const Mat3 expected = oracle::quaternion_from_two_vectors(Vec3(0, 0, 1), Vec3(0, 1, 0));
  CHECK(max_abs(r.matrix() - expected) < 1e-12);
  // Quarter turn about +x sends +y to -z.
  CHECK((r * Vec3(0, 1, 0) - Vec3(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("align_rotation: antiparallel vectors give a half turn") {
  for (const Vec3& o : {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0.3, -0.5, 0.81).normalized()}) {
    const Rotationd r = align_rotation(UnitVector3d(o), UnitVector3d(-o));
    check_rotation(r.matrix());
    CHECK((r * o + o).norm() < 1e-9);
    CHECK(r.matrix().trace() == doctest::Approx(-1.0).epsilon(1e-9));
  }
}

TEST_CASE("align_rotation: identical vectors give identity") {
  const Vec3 o = Vec3(1, 2, 3).normalized();
  CHECK(max_abs(align_rotation(UnitVector3d(o), UnitVector3d(o)).matrix() - Mat3::Identity()) < 1e-12);
}

TEST_CASE("align_rotation agrees with the quaternion oracle on random pairs") {
  Rng rng(11);
  int checked = 0;
  double worst = 0, worst_map = 0, worst_orth = 0;
  while (checked < 10000) {
    const Vec3 o = random_unit(rng), n = random_unit(rng);
    if (o.dot(n) <= -1 + 1e-6) continue;
    const Rotationd r = align_rotation(UnitVector3d(o), UnitVector3d(n));
    worst_map = std::max(worst_map, (r * o - n).norm());
    worst_orth = std::max(worst_orth, (r.matrix().transpose() * r.matrix() - Mat3::Identity()).norm());
    worst = std::max(worst, max_abs(r.matrix() - oracle::quaternion_from_two_vectors(o, n)));
    ++checked;
  }
  CHECK(worst_map < 1e-9);
  CHECK(worst_orth < 1e-9);
  CHECK(worst < 1e-9);
}

TEST_CASE("rectifying_homography: zero motion is identity") {
  const Intrinsicsd k(500, 480, 320, 240);
  const Planed plane(UnitVector3d(0.2, -0.1, -1), 3.0);
  const Homographyd h = rectifying_homography(k, Rotationd(), Vec3(Vec3::Zero()), plane);
  CHECK(max_abs(h.matrix() - Mat3::Identity()) < 1e-12);
}

TEST_CASE("rectifying_homography: translation along the normal scales by two") {
  const double d = 4.0;
  const Planed plane(UnitVector3d(0, 0, 1), d);
  const Homographyd h = rectifying_homography(Intrinsicsd(1, 1, 0, 0), Rotationd(), Vec3(0, 0, d * 0.5), plane);
  // diag(1, 1, 0.5) normalized to h33 = 1.
  Mat3 expected = Mat3::Identity();
  expected(0, 0) = expected(1, 1) = 2;
  CHECK(max_abs(h.matrix() - expected) < 1e-12);
  const Vec2 p = apply_homography(h, Vec2(3, -5));
  CHECK((p - Vec2(6, -10)).norm() < 1e-12);
}

TEST_CASE("rectifying_homography: t = 0 equals K R K^-1") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Intrinsicsd k(rng.uniform(200, 800), rng.uniform(200, 800), rng.uniform(100, 400), rng.uniform(100, 300));
    const Rotationd r = Rotationd::about_axis(random_unit(rng), rng.uniform(-1.0, 1.0));
    const Planed plane(UnitVector3d(random_unit(rng)), rng.uniform(0.5, 5.0));
    const Homographyd h = rectifying_homography(k, r, Vec3(Vec3::Zero()), plane);
    const Mat3 krk = Homographyd::normalized(k.matrix() * r.matrix() * k.inverse());
    CHECK(h.matrix() == krk);
  }
}

TEST_CASE("rectifying_homography matches the two-view plane projection oracle") {
  Rng rng(5);
  double worst = 0;
  int scenes = 0, samples = 0;
  while (scenes < 100) {
    const oracle::PinholeCamera cam{rng.uniform(300, 700), rng.uniform(300, 700), rng.uniform(200, 400),
                                    rng.uniform(150, 300)};
    // Camera-facing plane in front of view 1, tilted by up to ~45 degrees.
    const Vec3 n = Vec3(rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7), -1).normalized();
    const double d = rng.uniform(1.0, 6.0);
    const Mat3 r = Rotationd::about_axis(random_unit(rng), rng.uniform(-0.4, 0.4)).matrix();
    const Vec3 t(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    const Intrinsicsd k(cam.fx, cam.fy, cam.cx, cam.cy);
    const Homographyd h = rectifying_homography(k, Rotationd::from_matrix(r), t, Planed(UnitVector3d(n), d));
    int used = 0;
    for (int s = 0; s < 20; ++s) {
      const auto sample = oracle::project_plane_point(cam, n, d, r, t, rng.uniform(0, 640), rng.uniform(0, 480));
      if (!sample.in_front) continue;
      worst = std::max(worst, (apply_homography(h, sample.first) - sample.second).norm());
      ++used;
    }
    if (used == 0) continue;
    samples += used;
    ++scenes;
  }
  CHECK(samples > 1000);
  CHECK(worst < 1e-6);
}

TEST_CASE("rectifying_homography rejects non-positive plane distance") {
  Planed plane;
  plane.d = 0;
  CHECK_THROWS_AS(rectifying_homography(Intrinsicsd(1, 1, 0, 0), Rotationd(), Vec3(Vec3::Zero()), plane), Error);
}

TEST_CASE("homography_from_point_pairs: simple cases") {
  const std::vector<Vec2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  std::vector<PointPaird> same, doubled;
  for (const Vec2& p : square) {
    same.push_back({p, p});
    doubled.push_back({p, 2 * p});
  }
  CHECK(max_abs(homography_from_point_pairs(same).matrix() - Mat3::Identity()) < 1e-12);
  Mat3 d2 = Mat3::Identity();
  d2(0, 0) = d2(1, 1) = 2;
  CHECK(max_abs(homography_from_point_pairs(doubled).matrix() - d2) < 1e-12);
}

TEST_CASE("homography_from_point_pairs: errors") {
  std::vector<PointPaird> three{{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}};
  try {
    homography_from_point_pairs(three);
    FAIL("expected InsufficientPoints");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientPoints);
  }
  std::vector<PointPaird> collinear{{{0, 0}, {0, 0}}, {{1, 1}, {1, 0}}, {{2, 2}, {1, 1}}, {{0, 5}, {0, 1}}};
  try {
    homography_from_point_pairs(collinear);
    FAIL("expected DegenerateConfiguration");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateConfiguration);
  }
  std::vector<PointPaird> coincident(5, PointPaird{{3, 3}, {1, 2}});
  CHECK_THROWS_AS(homography_from_point_pairs(coincident), Error);
}

TEST_CASE("homography_from_point_pairs: exact minimal and overdetermined recovery") {
  Rng rng(17);
  double worst_frob = 0, worst_transfer = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Mat3 truth = oracle::random_homography(rng, 640, 480);
    const int n = trial % 2 == 0 ? 4 : 4 + static_cast<int>(rng.index(40));
    std::vector<PointPaird> pairs;
    for (int i = 0; i < n; ++i) {
      const Vec2 p(rng.uniform(0, 640), rng.uniform(0, 480));
      pairs.push_back({p, oracle::apply(truth, p)});
    }
    Homographyd h;
    try {
      h = homography_from_point_pairs(pairs);
    } catch (const Error&) {
      continue;  // a random near-collinear quadruple
    }
    worst_frob = std::max(worst_frob,
                          (oracle::frobenius_normalized(h.matrix()) - oracle::frobenius_normalized(truth)).norm());
    for (const auto& pp : pairs)
      worst_transfer = std::max(worst_transfer, (apply_homography(h, pp.source) - pp.target).norm());
  }
  CHECK(worst_frob < 1e-6);
  CHECK(worst_transfer < 1e-8);
}

TEST_CASE("homography_from_point_pairs: noisy least squares") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3 truth = oracle::random_homography(rng, 640, 480);
    std::vector<PointPaird> pairs;
    for (int i = 0; i < 12; ++i) {
      const Vec2 p(rng.uniform(0, 640), rng.uniform(0, 480));
      pairs.push_back({p, oracle::apply(truth, p) + Vec2(rng.normal(0, 0.5), rng.normal(0, 0.5))});
    }
    const Homographyd h = homography_from_point_pairs(pairs);
    double err = 0;
    for (const auto& pp : pairs) err += (apply_homography(h, pp.source) - oracle::apply(truth, pp.source)).norm();
    CHECK(err / pairs.size() < 1.0);
  }
}

TEST_CASE("apply_homography") {
  CHECK((apply_homography(Homographyd(), Vec2(3.5, 7.0)) - Vec2(3.5, 7.0)).norm() == 0);
  CHECK((apply_homography(Homographyd::scaling(2, 2), Vec2(1, 1)) - Vec2(2, 2)).norm() == 0);
  Rng rng(29);
  for (int i = 0; i < 100; ++i) {
    const Homographyd h = Homographyd::from_matrix(oracle::random_homography(rng, 400, 300));
    const Vec2 p(rng.uniform(0, 400), rng.uniform(0, 300));
    CHECK((apply_homography(invert(h), apply_homography(h, p)) - p).norm() < 1e-9);
  }
  Mat3 m = Mat3::Identity();
  m(0, 2) = 1;
  m(2, 0) = 1;
  m(2, 2) = 0;
  try {
    apply_homography(Homographyd::from_matrix(m), Vec2(0, 5));
    FAIL("expected PointAtInfinity");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PointAtInfinity);
  }
}

TEST_CASE("compose and invert") {
  Rng rng(31);
  const Homographyd h = Homographyd::from_matrix(oracle::random_homography(rng, 400, 300));
  CHECK(max_abs(compose(h, Homographyd()).matrix() - h.matrix()) < 1e-12);
  CHECK(max_abs(compose(h, invert(h)).matrix() - Mat3::Identity()) < 1e-9);

  const Vec2 c(200, 150);
  const Homographyd h30 = rotation_homography(30.0, c), h60 = rotation_homography(60.0, c);
  CHECK(max_abs(compose(h30, h60).matrix() - oracle::rotation_about(90, 200, 150)) < 1e-9);

  const Homographyd g = Homographyd::from_matrix(oracle::random_homography(rng, 400, 300));
  const Vec2 p(17, 230);
  CHECK((apply_homography(compose(h, g), p) - apply_homography(h, apply_homography(g, p))).norm() < 1e-9);

  Mat3 singular = Mat3::Identity();
  singular.row(2) = singular.row(0);
  try {
    invert(Homographyd::from_matrix(singular));
    FAIL("expected DegenerateHomography");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateHomography);
  }
}

TEST_CASE("rotation_homography") {
  const Vec2 c(200, 200);
  CHECK(max_abs(rotation_homography(0.0, c).matrix() - Mat3::Identity()) == 0);
  CHECK(max_abs(rotation_homography(360.0, c).matrix() - Mat3::Identity()) < 1e-12);
  CHECK((apply_homography(rotation_homography(90.0, c), Vec2(300, 200)) - Vec2(200, 300)).norm() < 1e-12);
  const Eigen::Matrix2d block = rotation_homography(37.0, c).matrix().topLeftCorner<2, 2>();
  CHECK((block.transpose() * block - Eigen::Matrix2d::Identity()).norm() < 1e-12);
  Rng rng(37);
  for (int i = 0; i < 100; ++i) {
    const double theta = rng.uniform(-720, 720);
    const Vec2 ce(rng.uniform(0, 500), rng.uniform(0, 500));
    const Homographyd round = compose(rotation_homography(theta, ce), rotation_homography(-theta, ce));
    CHECK(max_abs(round.matrix() - Mat3::Identity()) < 1e-10);
    CHECK(max_abs(rotation_homography(theta, ce).matrix() - oracle::rotation_about(theta, ce.x(), ce.y())) < 1e-9);
  }
}

TEST_CASE("homography normalization") {
  Mat3 m = Mat3::Identity() * 5.0;
  CHECK(Homographyd::from_matrix(m).matrix()(2, 2) == 1.0);
  Mat3 z = Mat3::Zero();
  z(0, 2) = -3;
  z(1, 0) = 1;
  z(2, 1) = 1;
  const Mat3 n = Homographyd::from_matrix(z).matrix();
  CHECK(n.norm() == doctest::Approx(1.0));
  CHECK(n(0, 2) > 0);
}
