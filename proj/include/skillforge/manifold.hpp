#pragma once

#include <cmath>

#include "skillforge/types.hpp"

// Riemannian primitives for the pose manifold R^3 x S^3 and its factors, the
// sphere S^2 used by small fixtures, the SPD cone, and the SE(3) Lie group
// machinery used by the controller.
//
// Tangent-space conventions, used consistently across the project:
//   - R^3 x S^3 tangents are 6-vectors [dpos(3), drot(3)]. The position block
//     is expressed in world axes, the orientation block in the body frame of
//     the base point (left-trivialized), so a left rotation of the scene
//     leaves orientation tangent coordinates unchanged.
//   - S^3 log/exp use the rotation-angle metric: |Log_q(p)| equals the
//     geodesic (great-circle) distance 2*acos(|<q,p>|).
//   - SPD tangent coordinates are orthonormal under the affine-invariant
//     metric (scaled vech of S^-1/2 V S^-1/2).

namespace skf {

constexpr double kCutLocusTol = 1e-7;

// ---------------------------------------------------------------------------
// S^3 (unit quaternions with antipodal identification)

namespace s3 {

inline double distance(const UnitQuaternion& q, const UnitQuaternion& p) {
  // atan2 form of 2*acos(|<q,p>|), stable near zero and pi.
  const UnitQuaternion r = (q.conjugate() * p).canonical();
  return 2.0 * std::atan2(r.vec().norm(), r.w());
}

inline Vec3 log(const UnitQuaternion& base, const UnitQuaternion& y) {
  const UnitQuaternion r = (base.conjugate() * y).canonical();
  const double vn = r.vec().norm();
  const double half_angle = std::atan2(vn, r.w());
  if (M_PI - 2.0 * half_angle < kCutLocusTol) {
    throw NumericalError("s3 log at cut locus: antipodal orientations");
  }
  if (vn < 1e-12) return 2.0 * r.vec();  // atan2(x,1) ~ x
  return (2.0 * half_angle / vn) * r.vec();
}

inline UnitQuaternion exp(const UnitQuaternion& base, const Vec3& v) {
  const double n = v.norm();
  if (n < 1e-12) {
    return base * UnitQuaternion(1.0, 0.5 * v.x(), 0.5 * v.y(), 0.5 * v.z());
  }
  const double h = 0.5 * n;
  const Vec3 u = (std::sin(h) / n) * v;
  return base * UnitQuaternion(std::cos(h), u.x(), u.y(), u.z());
}

// Matrix acting on body tangent coordinates; parallel transport along the
// geodesic from q to p. Rotation by -|u|/2 about the geodesic direction u.
inline Mat3 transport(const UnitQuaternion& q, const UnitQuaternion& p) {
  const Vec3 u = log(q, p);
  const double n = u.norm();
  if (n < 1e-14) return Mat3::Identity();
  const Vec3 axis = u / n;
  const double a = -0.5 * n;
  const Mat3 k = skew(axis);
  return Mat3::Identity() + std::sin(a) * k + (1.0 - std::cos(a)) * k * k;
}

}  // namespace s3

// ---------------------------------------------------------------------------
// S^2 (unit vectors in R^3), used by compact fixtures

namespace s2 {

// Deterministic orthonormal basis of the tangent plane at x.
inline void basis(const Vec3& x, Vec3& e1, Vec3& e2) {
  const Vec3 a = (std::abs(x.z()) < 0.9) ? Vec3::UnitZ() : Vec3::UnitX();
  e1 = (a - a.dot(x) * x).normalized();
  e2 = x.cross(e1);
}

inline double distance(const Vec3& x, const Vec3& y) {
  return std::atan2(x.cross(y).norm(), x.dot(y));
}

inline Vec3 log_ambient(const Vec3& x, const Vec3& y) {
  const double c = std::clamp(x.dot(y), -1.0, 1.0);
  const double theta = std::acos(c);
  if (M_PI - theta < kCutLocusTol) throw NumericalError("s2 log at cut locus");
  Vec3 d = y - c * x;
  const double dn = d.norm();
  if (dn < 1e-14) return Vec3::Zero();
  return (theta / dn) * d;
}

inline Vec2 log(const Vec3& x, const Vec3& y) {
  Vec3 e1, e2;
  basis(x, e1, e2);
  const Vec3 v = log_ambient(x, y);
  return Vec2(v.dot(e1), v.dot(e2));
}

inline Vec3 exp(const Vec3& x, const Vec2& c) {
  Vec3 e1, e2;
  basis(x, e1, e2);
  const Vec3 v = c.x() * e1 + c.y() * e2;
  const double n = v.norm();
  if (n < 1e-14) return x;
  return std::cos(n) * x + (std::sin(n) / n) * v;
}

// Ambient-space transport along the geodesic from x to y.
inline Vec3 transport_ambient(const Vec3& x, const Vec3& y, const Vec3& v) {
  const double c = std::clamp(x.dot(y), -1.0, 1.0);
  if (1.0 + c < kCutLocusTol) throw NumericalError("s2 transport through cut locus");
  return v - (v.dot(y) / (1.0 + c)) * (x + y);
}

inline Mat2 transport_matrix(const Vec3& x, const Vec3& y) {
  Vec3 f1, f2, g1, g2;
  basis(x, f1, f2);
  basis(y, g1, g2);
  Mat2 m;
  const Vec3 t1 = transport_ambient(x, y, f1);
  const Vec3 t2 = transport_ambient(x, y, f2);
  m << t1.dot(g1), t2.dot(g1), t1.dot(g2), t2.dot(g2);
  return m;
}

}  // namespace s2

// ---------------------------------------------------------------------------
// R^3 x S^3 product manifold (poses)

namespace r3s3 {

inline Vec6 log(const Pose& base, const Pose& y) {
  Vec6 v;
  v.head<3>() = y.position - base.position;
  v.tail<3>() = s3::log(base.orientation, y.orientation);
  return v;
}

inline Pose exp(const Pose& base, const Vec6& v) {
  return Pose{base.position + v.head<3>(), s3::exp(base.orientation, v.tail<3>())};
}

inline double distance(const Pose& a, const Pose& b) {
  const double dp = (a.position - b.position).squaredNorm();
  const double dq = s3::distance(a.orientation, b.orientation);
  return std::sqrt(dp + dq * dq);
}

inline Mat6 transport(const Pose& from, const Pose& to) {
  Mat6 m = Mat6::Identity();
  m.block<3, 3>(3, 3) = s3::transport(from.orientation, to.orientation);
  return m;
}

}  // namespace r3s3

// ---------------------------------------------------------------------------
// SPD cone with the affine-invariant metric

namespace spdman {

inline int tangent_dim(int n) { return n * (n + 1) / 2; }

// Scaled half-vectorization: orthonormal coordinates for symmetric matrices
// under the Frobenius inner product.
inline VecX vech(const MatX& s) {
  const int n = static_cast<int>(s.rows());
  VecX c(tangent_dim(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    c[k++] = s(i, i);
    for (int j = i + 1; j < n; ++j) c[k++] = M_SQRT2 * s(i, j);
  }
  return c;
}

inline MatX unvech(const VecX& c, int n) {
  MatX s(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    s(i, i) = c[k++];
    for (int j = i + 1; j < n; ++j) {
      s(i, j) = s(j, i) = c[k++] / M_SQRT2;
    }
  }
  return s;
}

inline VecX log(const SpdMatrix& base, const SpdMatrix& y) {
  const MatX bi = base.inv_sqrt();
  const SpdMatrix inner(MatX(bi * y.m() * bi), 0.0);
  return vech(inner.logm());
}

inline SpdMatrix exp(const SpdMatrix& base, const VecX& c) {
  const MatX bs = base.sqrt();
  const MatX w = unvech(c, base.rows());
  return SpdMatrix(MatX(bs * sym_expm(w) * bs));
}

inline double distance(const SpdMatrix& a, const SpdMatrix& b) {
  return log(a, b).norm();
}

// Orthogonal matrix acting on scaled-vech coordinates.
inline MatX transport_matrix(const SpdMatrix& from, const SpdMatrix& to) {
  const int n = from.rows();
  const int d = tangent_dim(n);
  const MatX w = unvech(log(from, to), n);
  const MatX f = SpdMatrix(to.inverse()).sqrt() * from.sqrt() * sym_expm(0.5 * w);
  MatX out(d, d);
  for (int k = 0; k < d; ++k) {
    VecX e = VecX::Zero(d);
    e[k] = 1.0;
    out.col(k) = vech(f * unvech(e, n) * f.transpose());
  }
  return out;
}

}  // namespace spdman

// ---------------------------------------------------------------------------
// SE(3) Lie group operations (controller side)

namespace se3 {

inline Mat3 rodrigues(const Vec3& w) {
  const double t = w.norm();
  const Mat3 k = skew(w);
  if (t < 1e-9) return Mat3::Identity() + k + 0.5 * k * k;
  return Mat3::Identity() + (std::sin(t) / t) * k + ((1.0 - std::cos(t)) / (t * t)) * k * k;
}

inline Vec3 rotation_log(const Mat3& r) {
  const UnitQuaternion q = UnitQuaternion::from_rotation_matrix(r).canonical();
  const double vn = q.vec().norm();
  const double angle = 2.0 * std::atan2(vn, q.w());
  if (M_PI - angle < kCutLocusTol) {
    throw NumericalError("rotation log undefined at angle pi");
  }
  if (vn < 1e-12) return 2.0 * q.vec();
  return (angle / vn) * q.vec();
}

// Left Jacobian of SO(3).
inline Mat3 left_jacobian(const Vec3& w) {
  const double t = w.norm();
  const Mat3 k = skew(w);
  if (t < 1e-6) return Mat3::Identity() + 0.5 * k + (1.0 / 6.0) * k * k;
  const double a = (1.0 - std::cos(t)) / (t * t);
  const double b = (t - std::sin(t)) / (t * t * t);
  return Mat3::Identity() + a * k + b * k * k;
}

inline Mat3 left_jacobian_inverse(const Vec3& w) {
  const double t = w.norm();
  const Mat3 k = skew(w);
  if (t < 1e-6) return Mat3::Identity() - 0.5 * k + (1.0 / 12.0) * k * k;
  const double b = 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
  return Mat3::Identity() - 0.5 * k + b * k * k;
}

// Exponential coordinates [v, w] of X: the constant twist moving the identity
// to X in one unit of time.
inline Vec6 log(const RigidTransform& x) {
  const Vec3 w = rotation_log(x.rotation());
  Vec6 out;
  out.tail<3>() = w;
  out.head<3>() = left_jacobian_inverse(w) * x.translation();
  return out;
}

inline RigidTransform exp(const Vec6& x) {
  const Vec3 v = x.head<3>();
  const Vec3 w = x.tail<3>();
  return RigidTransform(rodrigues(w), left_jacobian(w) * v);
}

inline Mat6 adjoint(const RigidTransform& x) {
  Mat6 ad = Mat6::Zero();
  ad.block<3, 3>(0, 0) = x.rotation();
  ad.block<3, 3>(0, 3) = skew(x.translation()) * x.rotation();
  ad.block<3, 3>(3, 3) = x.rotation();
  return ad;
}

// Lie bracket matrix (matrix commutator) of a twist.
inline Mat6 ad(const Vec6& x) {
  Mat6 m = Mat6::Zero();
  const Mat3 wx = skew(x.tail<3>());
  m.block<3, 3>(0, 0) = wx;
  m.block<3, 3>(0, 3) = skew(x.head<3>());
  m.block<3, 3>(3, 3) = wx;
  return m;
}

}  // namespace se3

// ---------------------------------------------------------------------------
// Manifold traits used by the generic learning stack

struct PoseManifold {
  using Point = Pose;
  static constexpr int kDim = 6;
  static VecX log(const Point& base, const Point& y) { return r3s3::log(base, y); }
  static Point exp(const Point& base, const VecX& v) { return r3s3::exp(base, Vec6(v)); }
  static MatX transport(const Point& from, const Point& to) { return r3s3::transport(from, to); }
  static double distance(const Point& a, const Point& b) { return r3s3::distance(a, b); }
  static Point origin() { return Pose::identity(); }
};

struct Sphere2Manifold {
  using Point = Vec3;
  static constexpr int kDim = 2;
  static VecX log(const Point& base, const Point& y) { return s2::log(base, y); }
  static Point exp(const Point& base, const VecX& v) { return s2::exp(base, Vec2(v)); }
  static MatX transport(const Point& from, const Point& to) { return s2::transport_matrix(from, to); }
  static double distance(const Point& a, const Point& b) { return s2::distance(a, b); }
  static Point origin() { return Vec3::UnitZ(); }
};

template <int N>
struct EuclideanManifold {
  using Point = Eigen::Matrix<double, N, 1>;
  static constexpr int kDim = N;
  static VecX log(const Point& base, const Point& y) { return y - base; }
  static Point exp(const Point& base, const VecX& v) { return base + Point(v); }
  static MatX transport(const Point&, const Point&) { return MatX::Identity(N, N); }
  static double distance(const Point& a, const Point& b) { return (a - b).norm(); }
  static Point origin() { return Point::Zero(); }
};

}  // namespace skf
