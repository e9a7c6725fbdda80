#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "skillforge/manifold.hpp"

using namespace skf;

TEST_CASE("quaternion canonicalization is idempotent and sign-invariant") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const UnitQuaternion q = oracle::random_quaternion(rng);
    const UnitQuaternion neg(-q.w(), -q.x(), -q.y(), -q.z());
    const UnitQuaternion c1 = q.canonical();
    const UnitQuaternion c2 = neg.canonical();
    CHECK((c1.coeffs_wxyz() - c2.coeffs_wxyz()).norm() < 1e-12);
    CHECK((c1.canonical().coeffs_wxyz() - c1.coeffs_wxyz()).norm() == 0.0);
    CHECK(c1.w() >= 0.0);
  }
}

TEST_CASE("exp of zero tangent returns the base point") {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Pose base = oracle::random_pose(rng);
    const Pose out = r3s3::exp(base, Vec6::Zero());
    CHECK(out.approx_equal(base, 1e-12));
  }
  const Vec3 x = Vec3::UnitZ();
  CHECK((s2::exp(x, Vec2::Zero()) - x).norm() < 1e-12);
}

TEST_CASE("s2 quarter great circle lands on the equator") {
  const Vec3 north = Vec3::UnitZ();
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const double phi = rng.uniform(0, 2 * M_PI);
    const Vec2 v(0.5 * M_PI * std::cos(phi), 0.5 * M_PI * std::sin(phi));
    const Vec3 y = s2::exp(north, v);
    CHECK(std::abs(y.z()) < 1e-12);
    CHECK(std::abs(y.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("log is the inverse of exp on random pose pairs") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const Pose a = oracle::random_pose(rng);
    const Pose b = oracle::random_pose(rng);
    const Vec6 v = r3s3::log(a, b);
    const Pose back = r3s3::exp(a, v);
    CHECK(r3s3::distance(back, b) < 1e-9);
    CHECK(r3s3::log(a, a).norm() < 1e-12);
  }
}

TEST_CASE("log norm equals the great-circle angle") {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const UnitQuaternion a = oracle::random_quaternion(rng);
    const UnitQuaternion b = oracle::random_quaternion(rng);
    CHECK(s3::log(a, b).norm() == doctest::Approx(oracle::quat_angle(a, b)).epsilon(1e-10));
  }
}

TEST_CASE("log uses the canonical representative near antipodes") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const UnitQuaternion q = oracle::random_quaternion(rng);
    const UnitQuaternion delta = UnitQuaternion::from_axis_angle(
        Vec3(rng.normal(), rng.normal(), rng.normal()), rng.uniform(0.05, 0.5));
    const UnitQuaternion near_antipodal(-(q * delta).w(), -(q * delta).x(), -(q * delta).y(),
                                        -(q * delta).z());
    const Vec3 v = s3::log(q, near_antipodal);
    CHECK(v.norm() < M_PI);
    CHECK(v.norm() == doctest::Approx(oracle::quat_angle(q, near_antipodal)).epsilon(1e-10));
  }
}

TEST_CASE("log rejects cut-locus input") {
  const UnitQuaternion q;
  const UnitQuaternion anti = UnitQuaternion::from_axis_angle(Vec3::UnitX(), M_PI);
  CHECK_THROWS_AS((void)s3::log(q, anti), NumericalError);
}

TEST_CASE("parallel transport is the identity for equal endpoints") {
  Rng rng(6);
  const Pose a = oracle::random_pose(rng);
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = rng.normal();
  CHECK(((r3s3::transport(a, a) * v) - v).norm() < 1e-12);
}

TEST_CASE("parallel transport preserves norms and inner products") {
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    const Pose a = oracle::random_pose(rng);
    const Pose b = oracle::random_pose(rng);
    const Mat6 t = r3s3::transport(a, b);
    Vec6 v, w;
    for (int j = 0; j < 6; ++j) {
      v[j] = rng.normal();
      w[j] = rng.normal();
    }
    CHECK(std::abs((t * v).norm() - v.norm()) < 1e-9);
    CHECK(std::abs((t * v).dot(t * w) - v.dot(w)) < 1e-9);
  }
}

TEST_CASE("s3 transport carries the geodesic velocity to its negated reverse") {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const UnitQuaternion a = oracle::random_quaternion(rng);
    const UnitQuaternion b = oracle::random_quaternion(rng);
    const Vec3 u = s3::log(a, b);
    const Vec3 moved = s3::transport(a, b) * u;
    CHECK((moved + s3::log(b, a)).norm() < 1e-9);
  }
}

TEST_CASE("s2 transport agrees with the ambient formula") {
  Rng rng(10);
  for (int i = 0; i < 100; ++i) {
    Vec3 x(rng.normal(), rng.normal(), rng.normal());
    Vec3 y(rng.normal(), rng.normal(), rng.normal());
    x.normalize();
    y.normalize();
    if (x.dot(y) < -0.99) continue;
    Vec3 e1, e2, g1, g2;
    s2::basis(x, e1, e2);
    s2::basis(y, g1, g2);
    const Vec2 c(rng.normal(), rng.normal());
    const Vec3 ambient = c.x() * e1 + c.y() * e2;
    const Vec3 moved = s2::transport_ambient(x, y, ambient);
    const Vec2 via_matrix = s2::transport_matrix(x, y) * c;
    CHECK((Vec2(moved.dot(g1), moved.dot(g2)) - via_matrix).norm() < 1e-10);
    CHECK(std::abs(moved.norm() - ambient.norm()) < 1e-10);
  }
}

TEST_CASE("se3 log of the identity and of pure translations") {
  CHECK(se3::log(RigidTransform::identity()).norm() < 1e-12);
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const Vec3 d(rng.normal(), rng.normal(), rng.normal());
    const Vec6 x = se3::log(RigidTransform(Mat3::Identity(), d));
    CHECK((x.head<3>() - d).norm() < 1e-12);
    CHECK(x.tail<3>().norm() < 1e-12);
  }
}

TEST_CASE("se3 exp/log invert each other and match the matrix-series oracle") {
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    Vec6 x;
    for (int j = 0; j < 6; ++j) x[j] = rng.normal();
    if (x.tail<3>().norm() >= M_PI - 1e-3) continue;
    const RigidTransform g = se3::exp(x);
    CHECK((g.matrix() - oracle::se3_exp_matrix(x)).norm() < 1e-9);
    const Vec6 back = se3::log(g);
    CHECK((back - x).norm() < 1e-9);

    const Pose p = oracle::random_pose(rng);
    const RigidTransform h = RigidTransform::from_pose(p);
    const RigidTransform rt = se3::exp(se3::log(h));
    CHECK((rt.matrix() - h.matrix()).norm() < 1e-9);
    CHECK((se3::log(h) - oracle::se3_log_matrix(h.matrix())).norm() < 1e-9);
  }
}

TEST_CASE("se3 log rejects rotations at angle pi") {
  const RigidTransform half_turn(se3::rodrigues(Vec3(0, 0, M_PI)), Vec3(0.1, 0, 0));
  CHECK_THROWS_AS((void)se3::log(half_turn), NumericalError);
}

TEST_CASE("adjoint of the identity and of pure rotations") {
  CHECK((se3::adjoint(RigidTransform::identity()) - Mat6::Identity()).norm() < 1e-12);
  Rng rng(13);
  const Mat3 r = oracle::random_rotation(rng);
  const Mat6 ad = se3::adjoint(RigidTransform(r, Vec3::Zero()));
  CHECK((ad.block<3, 3>(0, 0) - r).norm() < 1e-12);
  CHECK((ad.block<3, 3>(3, 3) - r).norm() < 1e-12);
  CHECK(ad.block<3, 3>(0, 3).norm() < 1e-12);
}

TEST_CASE("adjoint is a group homomorphism") {
  Rng rng(14);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform a = RigidTransform::from_pose(oracle::random_pose(rng));
    const RigidTransform b = RigidTransform::from_pose(oracle::random_pose(rng));
    CHECK((se3::adjoint(a * b) - se3::adjoint(a) * se3::adjoint(b)).norm() < 1e-9);
  }
}

TEST_CASE("ad bracket structure") {
  CHECK(se3::ad(Vec6::Zero()).norm() == 0.0);
  Rng rng(15);
  for (int i = 0; i < 100; ++i) {
    Vec6 x;
    for (int j = 0; j < 6; ++j) x[j] = rng.normal();
    CHECK((se3::ad(x) * x).norm() < 1e-12);  // bracket antisymmetry
  }
}

TEST_CASE("d/dt adjoint matches Ad_E ad_(E^-1 Edot) by finite differences") {
  // Smooth path E(t) = exp(t * a) * exp(t^2 * b).
  Rng rng(16);
  Vec6 a, b;
  for (int j = 0; j < 6; ++j) {
    a[j] = 0.4 * rng.normal();
    b[j] = 0.4 * rng.normal();
  }
  auto path = [&](double t) { return se3::exp(t * a) * se3::exp(t * t * b); };
  const double t0 = 0.37, h = 1e-6;
  const RigidTransform e = path(t0);
  const Mat6 fd = (se3::adjoint(path(t0 + h)) - se3::adjoint(path(t0 - h))) / (2 * h);
  // body twist of the path by central difference
  const Vec6 body = se3::log(path(t0).inverse() * path(t0 + h)) / h;
  const Mat6 analytic = se3::adjoint(e) * se3::ad(body);
  CHECK((fd - analytic).norm() < 1e-4);
}

TEST_CASE("spd manifold: roundtrip, distance symmetry, transport isometry") {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const SpdMatrix a(oracle::random_spd(rng, 3));
    const SpdMatrix b(oracle::random_spd(rng, 3));
    const VecX v = spdman::log(a, b);
    const SpdMatrix back = spdman::exp(a, v);
    CHECK((back.m() - b.m()).norm() < 1e-8 * std::max(1.0, b.m().norm()));
    CHECK(std::abs(v.norm() - spdman::distance(a, b)) < 1e-10);
    CHECK(std::abs(spdman::distance(a, b) - spdman::distance(b, a)) < 1e-9);

    const MatX t = spdman::transport_matrix(a, b);
    VecX w(6);
    for (int j = 0; j < 6; ++j) w[j] = rng.normal();
    CHECK(std::abs((t * w).norm() - w.norm()) < 1e-9);
  }
}

TEST_CASE("spd matrix type validates its invariants") {
  MatX bad(2, 2);
  bad << 1.0, 0.5, 0.2, 1.0;  // asymmetric
  CHECK_THROWS_AS(SpdMatrix{bad}, ValidationError);
  MatX indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  CHECK_THROWS_AS(SpdMatrix{indef}, ValidationError);
  CHECK(SpdMatrix::project(indef, 1e-6).min_eigenvalue() >= 1e-6 - 1e-12);
}

TEST_CASE("rigid transform validates rotations") {
  Mat3 notrot = Mat3::Identity();
  notrot(0, 0) = 2.0;
  CHECK_THROWS_AS(RigidTransform(notrot, Vec3::Zero()), ValidationError);
}
