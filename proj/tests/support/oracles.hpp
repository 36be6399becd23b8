#pragma once

// Reference implementations used only by the tests. They are written from
// first principles and deliberately avoid the library code paths they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

// Shortest-arc quaternion q = (1 + o.n, o x n), normalized, then expanded to a
// matrix by the textbook formula.
inline Mat3 quaternion_from_two_vectors(const Vec3& o, const Vec3& n) {
  double w = 1.0 + o.dot(n);
  Vec3 v = o.cross(n);
  const double norm = std::sqrt(w * w + v.squaredNorm());
  w /= norm;
  v /= norm;
  const double x = v.x(), y = v.y(), z = v.z();
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
       2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
       2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

struct PinholeCamera {
  double fx, fy, cx, cy;
  Vec2 project(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }
};

// A point of the plane n.X + d = 0 seen by two cameras: view 1 at the origin,
// view 2 at X' = R X + t. Returns both pixel projections.
struct TwoViewSample {
  Vec2 first, second;
  bool in_front = false;
};

inline TwoViewSample project_plane_point(const PinholeCamera& cam, const Vec3& n, double d, const Mat3& r,
                                         const Vec3& t, double u, double v) {
  // Ray through pixel (u, v) of view 1, intersected with the plane.
  const Vec3 ray((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
  const double lambda = -d / n.dot(ray);
  const Vec3 x = lambda * ray;
  const Vec3 x2 = r * x + t;
  TwoViewSample s;
  s.in_front = lambda > 0 && x2.z() > 1e-6;
  s.first = cam.project(x);
  if (s.in_front) s.second = cam.project(x2);
  return s;
}

struct MnnPair {
  int i, j;
  double distance;
};

// O(N^2) mutual nearest neighbours in double precision with lowest-index ties.
inline std::vector<MnnPair> mutual_nearest(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const int na = static_cast<int>(a.cols()), nb = static_cast<int>(b.cols());
  std::vector<int> best_b(na, -1), best_a(nb, -1);
  std::vector<double> db(na, std::numeric_limits<double>::infinity()), da(nb, std::numeric_limits<double>::infinity());
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      const double dist = (a.col(i) - b.col(j)).norm();
      if (dist < db[i]) db[i] = dist, best_b[i] = j;
      if (dist < da[j]) da[j] = dist, best_a[j] = i;
    }
  std::vector<MnnPair> out;
  for (int i = 0; i < na; ++i)
    if (best_b[i] >= 0 && best_a[best_b[i]] == i) out.push_back({i, best_b[i], db[i]});
  return out;
}

inline Mat3 rotation_z(double radians) {
  Mat3 r;
  r << std::cos(radians), -std::sin(radians), 0, std::sin(radians), std::cos(radians), 0, 0, 0, 1;
  return r;
}

// 2D rotation about a center in pixel coordinates (x right, y down), written
// out directly.
inline Mat3 rotation_about(double degrees, double cx, double cy) {
  const double a = degrees * 3.14159265358979323846 / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy, 0, 0, 1;
  return m;
}

inline Vec2 apply(const Mat3& h, const Vec2& p) {
  const Vec3 q = h * Vec3(p.x(), p.y(), 1.0);
  return q.head<2>() / q.z();
}

inline Mat3 frobenius_normalized(const Mat3& h) {
  Mat3 m = h / h.norm();
  Eigen::Index r, c;
  m.cwiseAbs().maxCoeff(&r, &c);
  return m(r, c) < 0 ? Mat3(-m) : m;
}

// Well-conditioned random homography around an image of the given size:
// rotation, mild anisotropic scale, shear and perspective about the center.
template <typename Rng>
Mat3 random_homography(Rng& rng, double w, double h, double persp = 2e-4) {
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  const double a = u(0, 2 * 3.14159265358979323846);
  Mat3 rot;
  rot << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  Mat3 aff;
  aff << u(0.8, 1.2), u(-0.1, 0.1), 0, u(-0.1, 0.1), u(0.8, 1.2), 0, u(-persp, persp), u(-persp, persp), 1;
  Mat3 to, from;
  to << 1, 0, -w / 2, 0, 1, -h / 2, 0, 0, 1;
  from << 1, 0, w / 2, 0, 1, h / 2, 0, 0, 1;
  return from * rot * aff * to;
}

}  // namespace oracle
