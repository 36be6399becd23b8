#pragma once

// 3x3 projective and rigid algebra: intrinsics, rotations, planes and
// homographies. Everything here is a value type templated on the scalar;
// the `d` aliases at the bottom are what the rest of the library uses.
//
// Pixel convention: origin at the top-left pixel center, x right, y down.
// Camera convention: the optical axis is +z in the camera frame.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "orthomatch/error.hpp"

namespace orthomatch {

template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
Matrix3<Scalar> skew(const Vector3<Scalar>& v) {
  Matrix3<Scalar> s;
  s << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return s;
}

template <typename Scalar>
struct Intrinsics {
  Scalar fx{1}, fy{1}, cx{0}, cy{0};

  Intrinsics() = default;
  Intrinsics(Scalar fx_, Scalar fy_, Scalar cx_, Scalar cy_) : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
    if (!(fx > 0) || !(fy > 0)) fail(ErrorCode::InvariantError, "focal lengths must be positive");
  }

  /// Accepts an upper-triangular K with zero skew and K(2,2) = 1.
  static Intrinsics from_matrix(const Matrix3<Scalar>& k) {
    const Scalar tol = Scalar(1e-12);
    if (std::abs(k(1, 0)) > tol || std::abs(k(2, 0)) > tol || std::abs(k(2, 1)) > tol ||
        std::abs(k(0, 1)) > tol || std::abs(k(2, 2) - 1) > tol)
      fail(ErrorCode::InvariantError, "intrinsic matrix must be [fx 0 cx; 0 fy cy; 0 0 1]");
    return Intrinsics(k(0, 0), k(1, 1), k(0, 2), k(1, 2));
  }

  Matrix3<Scalar> matrix() const {
    Matrix3<Scalar> k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  Matrix3<Scalar> inverse() const {
    Matrix3<Scalar> k;
    k << 1 / fx, 0, -cx / fx, 0, 1 / fy, -cy / fy, 0, 0, 1;
    return k;
  }

  /// K^-1 (u, v, 1): the viewing ray with unit z.
  Vector3<Scalar> ray(Scalar u, Scalar v) const { return {(u - cx) / fx, (v - cy) / fy, Scalar(1)}; }

  Vector2<Scalar> project(const Vector3<Scalar>& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }

  bool operator==(const Intrinsics&) const = default;
};

/// Proper rotation; construction checks orthonormality and det = +1 to 1e-9.
template <typename Scalar>
class Rotation {
 public:
  Rotation() : m_(Matrix3<Scalar>::Identity()) {}

  static Rotation from_matrix(const Matrix3<Scalar>& m) {
    const Scalar tol = Scalar(1e-9);
    if ((m.transpose() * m - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff() > tol ||
        std::abs(m.determinant() - 1) > tol)
      fail(ErrorCode::InvariantError, "matrix is not a proper rotation");
    Rotation r;
    r.m_ = m;
    return r;
  }

  static Rotation about_axis(const Vector3<Scalar>& axis, Scalar radians) {
    return from_matrix(Eigen::AngleAxis<Scalar>(radians, axis.normalized()).toRotationMatrix());
  }

  const Matrix3<Scalar>& matrix() const { return m_; }
  Rotation transpose() const {
    Rotation r;
    r.m_ = m_.transpose();
    return r;
  }

  Vector3<Scalar> operator*(const Vector3<Scalar>& v) const { return m_ * v; }
  Rotation operator*(const Rotation& o) const {
    Rotation r;
    r.m_ = m_ * o.m_;
    return r;
  }

 private:
  Matrix3<Scalar> m_;
};

template <typename Scalar>
class UnitVector3 {
 public:
  UnitVector3() : v_(0, 0, 1) {}
  /// Normalizes `v`; a zero vector is rejected.
  explicit UnitVector3(const Vector3<Scalar>& v) {
    const Scalar n = v.norm();
    if (!(n > Scalar(1e-300)) || !std::isfinite(n)) fail(ErrorCode::InvariantError, "cannot normalize a zero vector");
    v_ = v / n;
  }
  UnitVector3(Scalar x, Scalar y, Scalar z) : UnitVector3(Vector3<Scalar>(x, y, z)) {}

  const Vector3<Scalar>& vector() const { return v_; }
  Scalar x() const { return v_.x(); }
  Scalar y() const { return v_.y(); }
  Scalar z() const { return v_.z(); }
  UnitVector3 operator-() const { return UnitVector3(-v_); }

 private:
  Vector3<Scalar> v_;
};

/// Plane with camera-facing normal: points X on it satisfy n.X + d = 0, d > 0.
template <typename Scalar>
struct Plane {
  UnitVector3<Scalar> normal;
  Scalar d{1};

  Plane() = default;
  Plane(const UnitVector3<Scalar>& n, Scalar dist) : normal(n), d(dist) {
    if (!(d > 0)) fail(ErrorCode::InvariantError, "plane distance must be positive");
  }

  Scalar signed_distance(const Vector3<Scalar>& p) const { return normal.vector().dot(p) + d; }
};

/// Rigid transform taking frame-A coordinates to frame-B: p_b = R p_a + t.
template <typename Scalar>
struct Pose {
  Rotation<Scalar> rotation;
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  Vector3<Scalar> operator*(const Vector3<Scalar>& p) const { return rotation * p + translation; }
  Pose inverse() const {
    Pose r;
    r.rotation = rotation.transpose();
    r.translation = -(r.rotation * translation);
    return r;
  }
  /// (this * other)(p) = this(other(p))
  Pose operator*(const Pose& other) const {
    Pose r;
    r.rotation = rotation * other.rotation;
    r.translation = rotation * other.translation + translation;
    return r;
  }
};

/// Projective 3x3 map kept in canonical scale: H(2,2) = 1 when |H(2,2)| > 1e-9,
/// otherwise unit Frobenius norm with the largest-magnitude entry positive.
template <typename Scalar>
class Homography {
 public:
  Homography() : m_(Matrix3<Scalar>::Identity()) {}

  static Homography from_matrix(const Matrix3<Scalar>& raw) {
    if (!raw.allFinite()) fail(ErrorCode::DegenerateHomography, "non-finite homography");
    Homography h;
    h.m_ = normalized(raw);
    if (!(std::abs(h.m_.determinant()) > Scalar(1e-12)))
      fail(ErrorCode::DegenerateHomography, "homography is singular");
    return h;
  }

  static Homography identity() { return Homography(); }

  static Homography translation(Scalar tx, Scalar ty) {
    Matrix3<Scalar> m = Matrix3<Scalar>::Identity();
    m(0, 2) = tx;
    m(1, 2) = ty;
    return from_matrix(m);
  }

  static Homography scaling(Scalar sx, Scalar sy) {
    Matrix3<Scalar> m = Matrix3<Scalar>::Identity();
    m(0, 0) = sx;
    m(1, 1) = sy;
    return from_matrix(m);
  }

  static Matrix3<Scalar> normalized(const Matrix3<Scalar>& raw) {
    if (std::abs(raw(2, 2)) > Scalar(1e-9)) return raw / raw(2, 2);
    const Scalar f = raw.norm();
    if (!(f > 0)) return raw;
    Matrix3<Scalar> m = raw / f;
    Eigen::Index r = 0, c = 0;
    m.cwiseAbs().maxCoeff(&r, &c);
    return m(r, c) < 0 ? Matrix3<Scalar>(-m) : m;
  }

  const Matrix3<Scalar>& matrix() const { return m_; }

 private:
  Matrix3<Scalar> m_;
};

// ---------------------------------------------------------------------------

/// Maps pixel p through H with projective division.
template <typename Scalar>
Vector2<Scalar> apply_homography(const Homography<Scalar>& h, const Vector2<Scalar>& p) {
  const Vector3<Scalar> q = h.matrix() * Vector3<Scalar>(p.x(), p.y(), Scalar(1));
  if (std::abs(q.z()) < Scalar(1e-12)) fail(ErrorCode::PointAtInfinity, "point maps to infinity");
  return q.template head<2>() / q.z();
}

/// compose(a, b)(p) == a(b(p)).
template <typename Scalar>
Homography<Scalar> compose(const Homography<Scalar>& a, const Homography<Scalar>& b) {
  return Homography<Scalar>::from_matrix(a.matrix() * b.matrix());
}

template <typename Scalar>
Homography<Scalar> invert(const Homography<Scalar>& h) {
  const Eigen::FullPivLU<Matrix3<Scalar>> lu(h.matrix());
  if (!lu.isInvertible()) fail(ErrorCode::DegenerateHomography, "cannot invert singular homography");
  return Homography<Scalar>::from_matrix(lu.inverse());
}

/// In-plane rotation by `degrees` about `center`. Positive angles are
/// counter-clockwise in math orientation, i.e. clockwise on screen (y down).
/// Multiples of 90 degrees use exact trigonometric values.
template <typename Scalar>
Homography<Scalar> rotation_homography(Scalar degrees, const Vector2<Scalar>& center) {
  Scalar a = std::fmod(degrees, Scalar(360));
  if (a < 0) a += 360;
  Scalar c, s;
  if (a == 0) {
    c = 1, s = 0;
  } else if (a == 90) {
    c = 0, s = 1;
  } else if (a == 180) {
    c = -1, s = 0;
  } else if (a == 270) {
    c = 0, s = -1;
  } else {
    const Scalar rad = a * std::numbers::pi_v<Scalar> / 180;
    c = std::cos(rad), s = std::sin(rad);
  }
  Matrix3<Scalar> m;
  m << c, -s, center.x() - c * center.x() + s * center.y(),
       s, c, center.y() - s * center.x() - c * center.y(),
       0, 0, 1;
  return Homography<Scalar>::from_matrix(m);
}

/// Smallest rotation taking unit vector `from` onto unit vector `to`:
///   v = o x n,  R = I + [v]x + [v]x^2 (1 - o.n) / |o x n|^2.
/// Near-aligned inputs use the equivalent factor 1 / (1 + o.n). Antiparallel
/// inputs get a half turn about a fixed axis perpendicular to `from`.
template <typename Scalar>
Rotation<Scalar> align_rotation(const UnitVector3<Scalar>& from, const UnitVector3<Scalar>& to) {
  const Vector3<Scalar>& o = from.vector();
  const Vector3<Scalar>& n = to.vector();
  const Vector3<Scalar> v = o.cross(n);
  const Scalar c = o.dot(n);
  const Scalar s2 = v.squaredNorm();
  const Matrix3<Scalar> vx = skew(v);
  if (s2 >= Scalar(1e-12)) {
    return Rotation<Scalar>::from_matrix(Matrix3<Scalar>::Identity() + vx + vx * vx * ((1 - c) / s2));
  }
  if (c > 0) {
    return Rotation<Scalar>::from_matrix(Matrix3<Scalar>::Identity() + vx + vx * vx / (1 + c));
  }
  // Perpendicular axis: drop the smallest-magnitude component of o, swap the
  // remaining two and negate the first of them.
  Eigen::Index k = 0;
  o.cwiseAbs().minCoeff(&k);
  Vector3<Scalar> axis = Vector3<Scalar>::Zero();
  const Eigen::Index i = (k + 1) % 3, j = (k + 2) % 3;
  axis(i) = -o(j);
  axis(j) = o(i);
  axis.normalize();
  return Rotation<Scalar>::from_matrix(2 * axis * axis.transpose() - Matrix3<Scalar>::Identity());
}

/// H = K (R - t n^T / d) K^-1 for a plane n.X + d = 0 seen by a camera moved
/// by X' = R X + t.
template <typename Scalar>
Homography<Scalar> rectifying_homography(const Intrinsics<Scalar>& k, const Rotation<Scalar>& r,
                                         const Vector3<Scalar>& t, const Plane<Scalar>& plane) {
  if (!(plane.d > 0)) fail(ErrorCode::InvariantError, "plane distance must be positive");
  const Matrix3<Scalar> m =
      k.matrix() * (r.matrix() - t * plane.normal.vector().transpose() / plane.d) * k.inverse();
  return Homography<Scalar>::from_matrix(m);
}

template <typename Scalar>
struct PointPair {
  Vector2<Scalar> source;
  Vector2<Scalar> target;
};

namespace detail {

// Hartley isotropic normalization: centroid to origin, mean distance sqrt(2).
template <typename Scalar>
Matrix3<Scalar> hartley_transform(std::span<const Vector2<Scalar>> pts) {
  Vector2<Scalar> c = Vector2<Scalar>::Zero();
  for (const auto& p : pts) c += p;
  c /= Scalar(pts.size());
  Scalar mean = 0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= Scalar(pts.size());
  if (!(mean > 0)) fail(ErrorCode::DegenerateConfiguration, "all points coincide");
  const Scalar s = std::numbers::sqrt2_v<Scalar> / mean;
  Matrix3<Scalar> t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

template <typename Scalar>
Scalar triangle_area2(const Vector2<Scalar>& a, const Vector2<Scalar>& b, const Vector2<Scalar>& c) {
  const Vector2<Scalar> u = b - a, w = c - a;
  return u.x() * w.y() - u.y() * w.x();
}

template <typename Scalar>
bool has_collinear_triple(std::span<const Vector2<Scalar>> pts, Scalar tol) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k)
        if (std::abs(triangle_area2(pts[i], pts[j], pts[k])) < tol) return true;
  return false;
}

}  // namespace detail

/// Normalized DLT. Exactly four pairs must be in general position; more
/// pairs are solved in the least-squares sense.
template <typename Scalar>
Homography<Scalar> homography_from_point_pairs(std::span<const PointPair<Scalar>> pairs) {
  const std::size_t n = pairs.size();
  if (n < 4) fail(ErrorCode::InsufficientPoints, "need at least 4 point pairs");
  std::vector<Vector2<Scalar>> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!pairs[i].source.allFinite() || !pairs[i].target.allFinite())
      fail(ErrorCode::DegenerateConfiguration, "non-finite point");
    src[i] = pairs[i].source;
    dst[i] = pairs[i].target;
  }
  const Matrix3<Scalar> ts = detail::hartley_transform<Scalar>(src);
  const Matrix3<Scalar> td = detail::hartley_transform<Scalar>(dst);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = (ts * src[i].homogeneous()).template head<2>();
    dst[i] = (td * dst[i].homogeneous()).template head<2>();
  }
  if (n == 4 && (detail::has_collinear_triple<Scalar>(src, Scalar(1e-9)) ||
                 detail::has_collinear_triple<Scalar>(dst, Scalar(1e-9))))
    fail(ErrorCode::DegenerateConfiguration, "three of the four points are collinear");

  Eigen::Matrix<Scalar, Eigen::Dynamic, 9> a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar x = src[i].x(), y = src[i].y(), u = dst[i].x(), v = dst[i].y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::Matrix<Scalar, 9, 1> h;
  Eigen::Matrix<Scalar, 9, 1> sv;
  if (n == 4) {
    // Pad to square so the full V is available.
    Eigen::Matrix<Scalar, 9, 9> sq = Eigen::Matrix<Scalar, 9, 9>::Zero();
    sq.topRows(8) = a;
    Eigen::JacobiSVD<Eigen::Matrix<Scalar, 9, 9>> svd(sq, Eigen::ComputeFullV);
    h = svd.matrixV().col(8);
    sv = svd.singularValues();
  } else {
    Eigen::JacobiSVD<Eigen::Matrix<Scalar, Eigen::Dynamic, 9>> svd(a, Eigen::ComputeFullV);
    h = svd.matrixV().col(8);
    sv = svd.singularValues();
  }
  if (!(sv(7) > Scalar(1e-10) * sv(0)))
    fail(ErrorCode::DegenerateConfiguration, "point configuration does not determine a homography");
  Matrix3<Scalar> hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography<Scalar>::from_matrix(td.inverse() * hn * ts);
}

template <typename Scalar>
Homography<Scalar> homography_from_point_pairs(const std::vector<PointPair<Scalar>>& pairs) {
  return homography_from_point_pairs(std::span<const PointPair<Scalar>>(pairs));
}

// ---------------------------------------------------------------------------

using Intrinsicsd = Intrinsics<double>;
using Rotationd = Rotation<double>;
using UnitVector3d = UnitVector3<double>;
using Planed = Plane<double>;
using Posed = Pose<double>;
using Homographyd = Homography<double>;
using PointPaird = PointPair<double>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

}  // namespace orthomatch
