#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <cmath>

#include "skillforge/error.hpp"

namespace skf {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using VecX = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using MatX = Eigen::MatrixXd;

constexpr double kUnitTol = 1e-9;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(),
      v.z(), 0, -v.x(),
      -v.y(), v.x(), 0;
  return m;
}

// Unit quaternion, stored wxyz. Antipodal representatives denote the same
// orientation; canonical() picks the sign with w >= 0 (ties resolved on x,
// then y, then z).
class UnitQuaternion {
 public:
  UnitQuaternion() : w_(1), x_(0), y_(0), z_(0) {}
  UnitQuaternion(double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {
    normalize();
  }

  static UnitQuaternion identity() { return UnitQuaternion(); }

  // Unit axis and angle in radians.
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n < 1e-15) return identity();
    const Vec3 u = axis / n;
    const double h = 0.5 * angle;
    return UnitQuaternion(std::cos(h), u.x() * std::sin(h), u.y() * std::sin(h), u.z() * std::sin(h));
  }

  static UnitQuaternion from_rotation_matrix(const Mat3& r);

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }
  Vec3 vec() const { return Vec3(x_, y_, z_); }
  Vec4 coeffs_wxyz() const { return Vec4(w_, x_, y_, z_); }

  UnitQuaternion conjugate() const { return UnitQuaternion(w_, -x_, -y_, -z_, NoNormalize{}); }

  UnitQuaternion operator*(const UnitQuaternion& o) const {
    return UnitQuaternion(
        w_ * o.w_ - x_ * o.x_ - y_ * o.y_ - z_ * o.z_,
        w_ * o.x_ + x_ * o.w_ + y_ * o.z_ - z_ * o.y_,
        w_ * o.y_ - x_ * o.z_ + y_ * o.w_ + z_ * o.x_,
        w_ * o.z_ + x_ * o.y_ - y_ * o.x_ + z_ * o.w_);
  }

  double dot(const UnitQuaternion& o) const {
    return w_ * o.w_ + x_ * o.x_ + y_ * o.y_ + z_ * o.z_;
  }

  UnitQuaternion canonical() const {
    const double c[4] = {w_, x_, y_, z_};
    for (int i = 0; i < 4; ++i) {
      if (c[i] > 0) return *this;
      if (c[i] < 0) return UnitQuaternion(-w_, -x_, -y_, -z_, NoNormalize{});
    }
    return *this;
  }

  Vec3 rotate(const Vec3& v) const {
    const Vec3 q = vec();
    const Vec3 t = 2.0 * q.cross(v);
    return v + w_ * t + q.cross(t);
  }

  Mat3 rotation_matrix() const {
    Mat3 r;
    const double ww = w_ * w_, xx = x_ * x_, yy = y_ * y_, zz = z_ * z_;
    r << ww + xx - yy - zz, 2 * (x_ * y_ - w_ * z_), 2 * (x_ * z_ + w_ * y_),
        2 * (x_ * y_ + w_ * z_), ww - xx + yy - zz, 2 * (y_ * z_ - w_ * x_),
        2 * (x_ * z_ - w_ * y_), 2 * (y_ * z_ + w_ * x_), ww - xx - yy + zz;
    return r;
  }

  bool approx_equal(const UnitQuaternion& o, double tol = 1e-9) const {
    return std::abs(std::abs(dot(o)) - 1.0) < tol;
  }

 private:
  struct NoNormalize {};
  UnitQuaternion(double w, double x, double y, double z, NoNormalize) : w_(w), x_(x), y_(y), z_(z) {}

  void normalize() {
    const double n = std::sqrt(w_ * w_ + x_ * x_ + y_ * y_ + z_ * z_);
    require(n > 1e-12, "quaternion with near-zero norm");
    if (std::abs(n - 1.0) > kUnitTol) {
      w_ /= n;
      x_ /= n;
      y_ /= n;
      z_ /= n;
    }
  }

  double w_, x_, y_, z_;
};

inline UnitQuaternion UnitQuaternion::from_rotation_matrix(const Mat3& r) {
  // Shepperd's method.
  const double tr = r.trace();
  double w, x, y, z;
  if (tr > 0) {
    double s = std::sqrt(tr + 1.0) * 2;
    w = 0.25 * s;
    x = (r(2, 1) - r(1, 2)) / s;
    y = (r(0, 2) - r(2, 0)) / s;
    z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2;
    w = (r(2, 1) - r(1, 2)) / s;
    x = 0.25 * s;
    y = (r(0, 1) + r(1, 0)) / s;
    z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2;
    w = (r(0, 2) - r(2, 0)) / s;
    x = (r(0, 1) + r(1, 0)) / s;
    y = 0.25 * s;
    z = (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2;
    w = (r(1, 0) - r(0, 1)) / s;
    x = (r(0, 2) + r(2, 0)) / s;
    y = (r(1, 2) + r(2, 1)) / s;
    z = 0.25 * s;
  }
  return UnitQuaternion(w, x, y, z);
}

// Point on R^3 x S^3: end-effector and object states.
struct Pose {
  Vec3 position = Vec3::Zero();
  UnitQuaternion orientation;

  static Pose identity() { return Pose{}; }

  bool approx_equal(const Pose& o, double tol = 1e-9) const {
    return (position - o.position).norm() < tol && orientation.approx_equal(o.orientation, tol);
  }
};

// Element of SE(3).
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {
    require((rotation_.transpose() * rotation_ - Mat3::Identity()).norm() < 1e-8,
            "rotation matrix is not orthonormal");
    require(rotation_.determinant() > 0, "rotation matrix has negative determinant");
  }

  static RigidTransform identity() { return RigidTransform(); }

  static RigidTransform from_pose(const Pose& p) {
    return RigidTransform(p.orientation.rotation_matrix(), p.position);
  }

  Pose to_pose() const {
    return Pose{translation_, UnitQuaternion::from_rotation_matrix(rotation_)};
  }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  RigidTransform inverse() const {
    return RigidTransform(rotation_.transpose(), -(rotation_.transpose() * translation_));
  }

  RigidTransform operator*(const RigidTransform& o) const {
    return RigidTransform(rotation_ * o.rotation_, rotation_ * o.translation_ + translation_);
  }

  Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = rotation_;
    m.block<3, 1>(0, 3) = translation_;
    return m;
  }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

// Body twist split into linear and angular parts; coordinate order [v, w].
struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();

  Vec6 coords() const {
    Vec6 c;
    c << linear, angular;
    return c;
  }
  static Twist from_coords(const Vec6& c) { return Twist{c.head<3>(), c.tail<3>()}; }
};

// Symmetric positive-definite matrix with validated invariants.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(const MatX& m, double min_eig = 0.0) : m_(m) { validate(min_eig); }

  static SpdMatrix identity(int n) { return SpdMatrix(MatX::Identity(n, n)); }

  static SpdMatrix diagonal(const VecX& d) {
    return SpdMatrix(MatX(d.asDiagonal()));
  }

  // Symmetrize and clamp eigenvalues to at least `floor`.
  static SpdMatrix project(const MatX& m, double floor = 1e-10) {
    MatX sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<MatX> es(sym);
    VecX eig = es.eigenvalues().cwiseMax(floor);
    SpdMatrix out;
    out.m_ = es.eigenvectors() * eig.asDiagonal() * es.eigenvectors().transpose();
    out.m_ = 0.5 * (out.m_ + out.m_.transpose());
    return out;
  }

  const MatX& m() const { return m_; }
  int rows() const { return static_cast<int>(m_.rows()); }

  MatX inverse() const { return m_.llt().solve(MatX::Identity(m_.rows(), m_.cols())); }

  double log_det() const {
    Eigen::LLT<MatX> llt(m_);
    require(llt.info() == Eigen::Success, "SPD Cholesky failed");
    return 2.0 * MatX(llt.matrixL()).diagonal().array().log().sum();
  }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<MatX> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  MatX sqrt() const { return apply_spectral([](double x) { return std::sqrt(x); }); }
  MatX inv_sqrt() const { return apply_spectral([](double x) { return 1.0 / std::sqrt(x); }); }
  MatX logm() const { return apply_spectral([](double x) { return std::log(x); }); }

 private:
  template <class F>
  MatX apply_spectral(F f) const {
    Eigen::SelfAdjointEigenSolver<MatX> es(m_);
    VecX eig = es.eigenvalues();
    for (int i = 0; i < eig.size(); ++i) eig[i] = f(eig[i]);
    return es.eigenvectors() * eig.asDiagonal() * es.eigenvectors().transpose();
  }

  void validate(double min_eig) {
    require(m_.rows() == m_.cols(), "SPD matrix must be square");
    require((m_ - m_.transpose()).cwiseAbs().maxCoeff() < 1e-10, "SPD matrix must be symmetric");
    m_ = 0.5 * (m_ + m_.transpose());
    Eigen::SelfAdjointEigenSolver<MatX> es(m_, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > min_eig)) {
      throw ValidationError("matrix is not positive definite (min eig " +
                            std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
  }

  MatX m_;
};

inline MatX sym_expm(const MatX& s) {
  Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (s + s.transpose()));
  VecX eig = es.eigenvalues();
  for (int i = 0; i < eig.size(); ++i) eig[i] = std::exp(eig[i]);
  return es.eigenvectors() * eig.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace skf
