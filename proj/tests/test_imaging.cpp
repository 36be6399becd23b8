#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "oracles.hpp"
#include "orthomatch/image.hpp"
#include "orthomatch/image_io.hpp"
#include "orthomatch/random.hpp"
#include "orthomatch/scenes.hpp"

using namespace orthomatch;
namespace fs = std::filesystem;

namespace {

Image gradient_card(int w, int h) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<float>(0.5 * x / (w - 1) + 0.5 * y / (h - 1));
  return img;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("orthomatch_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("Image invariants") {
  Image img(4, 3, 3, 0.5f);
  CHECK(img.data().size() == 36);
  CHECK_NOTHROW(img.validate());
  img.at(1, 1, 2) = 1.5f;
  CHECK_THROWS_AS(img.validate(), Error);
  img.at(1, 1, 2) = std::nanf("");
  CHECK_THROWS_AS(img.validate(), Error);
  CHECK_THROWS_AS(Image(2, 2, 1, std::vector<float>(3)), Error);
  CHECK_THROWS_AS(Image(2, 2, 2), Error);
}

TEST_CASE("warp: identity is bit-identical") {
  const Image img = make_texture(50, 40, 1);
  const WarpResult r = warp(img, Homographyd(), 50, 40);
  CHECK(r.image == img);
  CHECK(r.valid_count() == 50u * 40u);
}

TEST_CASE("warp: 180 degree rotation twice restores the card") {
  const Image card = gradient_card(64, 64);
  const Homographyd h = rotation_homography(180.0, Vec2(31.5, 31.5));
  const WarpResult once = warp(card, h, 64, 64);
  const WarpResult twice = warp(once.image, h, 64, 64);
  double worst = 0;
  for (int y = 1; y < 63; ++y)
    for (int x = 1; x < 63; ++x) {
      REQUIRE(twice.valid(x, y));
      worst = std::max(worst, std::abs(double(twice.image.at(x, y)) - card.at(x, y)));
    }
  CHECK(worst <= 2.0 / 255);
}

TEST_CASE("warp: scaled white square covers four times the area") {
  Image img(128, 128);
  for (int y = 10; y < 110; ++y)
    for (int x = 10; x < 110; ++x) img.at(x, y) = 1.0f;
  const WarpResult r = warp(img, Homographyd::scaling(2, 2), 256, 256);
  int white = 0;
  for (float v : r.image.data()) white += v > 0.5f;
  CHECK(std::abs(white - 40000) <= 800);
}

TEST_CASE("warp: value range and validity mask") {
  Rng rng(41);
  const Image img = make_texture(96, 80, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat3 m = oracle::random_homography(rng, 96, 80, 1e-3);
    const WarpResult r = warp(img, Homographyd::from_matrix(m), 110, 90);
    const Mat3 inv = m.inverse();
    int mismatches = 0;
    for (int y = 0; y < 90; ++y)
      for (int x = 0; x < 110; ++x) {
        const float v = r.image.at(x, y);
        CHECK((v >= 0.0f && v <= 1.0f));
        const Eigen::Vector3d q = inv * Eigen::Vector3d(x, y, 1);
        const double sx = q.x() / q.z(), sy = q.y() / q.z();
        // Skip samples that sit on the hull boundary to rounding precision.
        const double margin = std::min({std::abs(sx), std::abs(sy), std::abs(sx - 95), std::abs(sy - 79)});
        if (margin < 1e-9) continue;
        const bool inside = q.z() > 0 && sx >= 0 && sy >= 0 && sx <= 95 && sy <= 79;
        mismatches += inside != r.valid(x, y);
        if (!r.valid(x, y)) CHECK(v == 0.0f);
      }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("warp: depth mask invalidates dependent samples") {
  const Image img = make_texture(20, 20, 3);
  DepthMap depth(20, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) depth.set(x, y, 1.0f);
  depth.invalidate(10, 10);
  const WarpResult r = warp(img, depth, Homographyd::translation(0.5, 0.5), 20, 20);
  // Output (x, y) samples source (x - 0.5, y - 0.5), tapping (x-1..x, y-1..y).
  CHECK_FALSE(r.valid(10, 10));
  CHECK_FALSE(r.valid(11, 11));
  CHECK_FALSE(r.valid(11, 10));
  CHECK(r.valid(12, 12));
  CHECK(r.valid(9, 9));
  CHECK_THROWS_AS(warp(img, DepthMap(10, 10), Homographyd(), 20, 20), Error);
}

TEST_CASE("warp round trip on random well-conditioned homographies") {
  Rng rng(43);
  const Image img = make_texture(160, 160, 4);
  int done = 0;
  while (done < 20) {
    const Mat3 m = oracle::random_homography(rng, 160, 160, 5e-4);
    Eigen::JacobiSVD<Mat3> svd(m);
    if (svd.singularValues()(0) / svd.singularValues()(2) >= 50) continue;
    const Homographyd h = Homographyd::from_matrix(m);
    const WarpResult fwd = warp(img, h, 160, 160);
    const WarpResult back = warp(fwd.image, invert(h), 160, 160);
    // Interior: pixels whose forward position is at least 2 px inside fwd's valid area.
    double sum = 0;
    int n = 0;
    for (int y = 0; y < 160; ++y)
      for (int x = 0; x < 160; ++x) {
        if (!back.valid(x, y)) continue;
        const Vec2 p = apply_homography(h, Vec2(x, y));
        bool interior = true;
        for (int dy = -2; dy <= 2 && interior; ++dy)
          for (int dx = -2; dx <= 2 && interior; ++dx) {
            const int qx = static_cast<int>(std::floor(p.x())) + dx, qy = static_cast<int>(std::floor(p.y())) + dy;
            interior = qx >= 0 && qy >= 0 && qx < 160 && qy < 160 && fwd.valid(qx, qy);
          }
        if (!interior) continue;
        sum += std::abs(double(back.image.at(x, y)) - img.at(x, y));
        ++n;
      }
    REQUIRE(n > 1000);
    CHECK(sum / n < 2.0 / 255);
    ++done;
  }
}

TEST_CASE("warp rejects singular homographies") {
  Mat3 m = Mat3::Identity();
  m.row(1) = m.row(0);
  CHECK_THROWS_AS(warp(Image(4, 4), Homographyd::from_matrix(m), 4, 4), Error);
}

TEST_CASE("grayscale") {
  Image white(2, 2, 3, 1.0f);
  CHECK(grayscale(white).at(1, 1) == doctest::Approx(1.0));
  Image green(1, 1, 3, 0.0f);
  green.at(0, 0, 1) = 1.0f;
  CHECK(grayscale(green).at(0, 0) == doctest::Approx(0.587));
  Rng rng(47);
  Image rgb(30, 30, 3);
  for (float& v : rgb.data()) v = static_cast<float>(rng.uniform());
  const Image g = grayscale(rgb);
  CHECK(g.channels() == 1);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 30; ++x) {
      const float lo = std::min({rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2)});
      const float hi = std::max({rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2)});
      CHECK(g.at(x, y) >= lo - 1e-6f);
      CHECK(g.at(x, y) <= hi + 1e-6f);
    }
  const Image one = make_texture(8, 8, 5);
  CHECK(grayscale(one) == one);
}

TEST_CASE("gradients: constant and ramp") {
  const GradientField c = gradients(Image(10, 10, 1, 0.3f));
  for (float v : c.gx) CHECK(v == 0.0f);
  for (float v : c.gy) CHECK(v == 0.0f);

  const int w = 40;
  Image ramp(w, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < w; ++x) ramp.at(x, y) = static_cast<float>(double(x) / w);
  const GradientField g = gradients(ramp);
  for (int y = 0; y < 12; ++y)
    for (int x = 1; x < w - 1; ++x) {
      CHECK(g.x_at(x, y) == doctest::Approx(1.0 / w).epsilon(1e-4));
      CHECK(g.y_at(x, y) == 0.0f);
    }
  CHECK_THROWS_AS(gradients(Image(3, 3, 3)), Error);
}

TEST_CASE("gradients: second-order convergence on a sinusoid") {
  // f(u, v) = 0.5 + 0.2 sin(2 pi u) cos(2 pi v) on the unit square sampled at N.
  auto max_error = [](int n) {
    Image img(n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double u = double(x) / n, v = double(y) / n;
        img.at(x, y) = static_cast<float>(0.5 + 0.2 * std::sin(2 * std::numbers::pi * u) * std::cos(2 * std::numbers::pi * v));
      }
    const GradientField g = gradients(img);
    double worst = 0;
    for (int y = 2; y < n - 2; ++y)
      for (int x = 2; x < n - 2; ++x) {
        const double u = double(x) / n, v = double(y) / n;
        const double fx = 0.2 * 2 * std::numbers::pi * std::cos(2 * std::numbers::pi * u) * std::cos(2 * std::numbers::pi * v);
        const double fy = -0.2 * 2 * std::numbers::pi * std::sin(2 * std::numbers::pi * u) * std::sin(2 * std::numbers::pi * v);
        worst = std::max({worst, std::abs(g.x_at(x, y) * n - fx), std::abs(g.y_at(x, y) * n - fy)});
      }
    return worst;
  };
  const double e1 = max_error(32), e2 = max_error(64);
  CHECK(e1 < 0.05);
  CHECK(e1 / e2 > 3.5);
}

TEST_CASE("backproject") {
  DepthMap d(6, 6);
  d.set(3, 4, 2.0f);
  const auto pts = backproject(d, Intrinsicsd(1, 1, 0, 0), PixelRect{0, 0, 6, 6});
  REQUIRE(pts.size() == 1);
  CHECK((pts[0] - Vec3(6, 8, 2)).norm() < 1e-12);

  try {
    backproject(d, Intrinsicsd(1, 1, 0, 0), PixelRect{0, 0, 2, 2});
    FAIL("expected EmptyROI");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyROI);
  }
  CHECK_THROWS_AS(backproject(d, Intrinsicsd(1, 1, 0, 0), PixelRect{0, 0, 7, 6}), Error);
}

TEST_CASE("backproject: planes and reprojection") {
  const Intrinsicsd k(300, 310, 80.5, 60.25);
  DepthMap fronto(160, 120);
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 160; ++x) fronto.set(x, y, 1.0f);
  for (const Vec3& p : backproject(fronto, k, PixelRect{10, 10, 150, 110})) CHECK(std::abs(p.z() - 1.0) < 1e-9);

  // Tilted plane n.X = c: depth along each ray is c / (n . ray).
  const Vec3 n = Vec3(0.3, -0.2, 1.0).normalized();
  const double c = 2.5;
  DepthMap tilted(160, 120);
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 160; ++x) tilted.set(x, y, static_cast<float>(c / n.dot(k.ray(x, y))));
  double worst_plane = 0, worst_pixel = 0;
  const auto pts = backproject(tilted, k, PixelRect{0, 0, 160, 120});
  CHECK(pts.size() == 160u * 120u);
  std::size_t i = 0;
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 160; ++x, ++i) {
      const double metres = tilted.depth(x, y);
      // Stored depth is float; compare against the plane through the stored value.
      worst_plane = std::max(worst_plane, std::abs(n.dot(pts[i]) - c) / c);
      worst_pixel = std::max(worst_pixel, (k.project(pts[i]) - Vec2(x, y)).norm());
      CHECK(pts[i].z() == doctest::Approx(metres));
    }
  CHECK(worst_plane < 1e-6);
  CHECK(worst_pixel < 1e-9);
}

TEST_CASE("DepthMap validity") {
  DepthMap d(3, 3);
  CHECK(d.valid_count() == 0);
  d.set(0, 0, -1.0f);
  d.set(1, 0, std::numeric_limits<float>::infinity());
  d.set(2, 0, 0.0f);
  d.set(0, 1, 1.25f);
  CHECK(d.valid_count() == 1);
  CHECK(d.valid(0, 1));
  double v = 0;
  CHECK_FALSE(d.sample(0.5, 0.5, v));
}

TEST_CASE("PNG round trips") {
  const fs::path dir = temp_dir("png");
  Image rgb(7, 5, 3);
  for (int i = 0; i < 7 * 5 * 3; ++i) rgb.data()[i] = static_cast<float>((i * 37 % 256) / 255.0);
  write_png(dir / "rgb.png", rgb);
  const Image back = read_png(dir / "rgb.png");
  CHECK(back.channels() == 3);
  CHECK(back == rgb);

  DepthMap d(9, 4);
  d.set(1, 1, 1.234f);
  d.set(8, 3, 65.0f);
  d.set(2, 2, 70.0f);  // beyond 16-bit millimetres
  write_depth_png(dir / "d.png", d);
  const DepthMap dd = read_depth_png(dir / "d.png", ImageSize{9, 4});
  CHECK(dd.valid(1, 1));
  CHECK(dd.depth(1, 1) == doctest::Approx(1.234).epsilon(1e-6));
  CHECK(dd.depth(8, 3) == doctest::Approx(65.0));
  CHECK_FALSE(dd.valid(2, 2));
  CHECK(dd.valid_count() == 2);

  CHECK_THROWS_AS(read_depth_png(dir / "d.png", ImageSize{8, 4}), Error);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), Error);
  {
    std::FILE* f = std::fopen((dir / "junk.png").c_str(), "wb");
    std::fputs("not a png", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_png(dir / "junk.png"), Error);
  fs::remove_all(dir);
}
