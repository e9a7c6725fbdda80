#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "skillforge/posekp.hpp"

using namespace skf;

namespace {

AnnotatedCloud box_cloud(int n, Rng& rng, double scale = 0.05) {
  std::vector<int> ids;
  MatX pts(n, 3);
  for (int i = 0; i < n; ++i) {
    ids.push_back(i);
    pts.row(i) = Vec3(scale * rng.normal(), scale * rng.normal(), scale * rng.normal());
  }
  return AnnotatedCloud(ids, pts);
}

}  // namespace

TEST_CASE("confidence filter keeps exactly the confident keypoints") {
  std::vector<KeypointObservation> obs(4);
  obs[0].confidence = 0.9;
  obs[1].confidence = 0.3;
  obs[2].confidence = 0.5;
  obs[3].confidence = 0.0;
  CHECK(filter_by_confidence(obs, 0.0).size() == 4);
  const auto kept = filter_by_confidence(obs, 0.5);
  CHECK(kept.size() == 2);
  CHECK(filter_by_confidence(obs, 0.95).empty());
  CHECK_THROWS_AS(filter_by_confidence(obs, 1.0), ValidationError);
}

TEST_CASE("unproject basics and pinhole roundtrip") {
  CameraIntrinsics intr{500, 480, 320, 240};
  KeypointObservation center;
  center.u = 320;
  center.v = 240;
  center.depth = 1.0;
  CHECK((unproject(center, intr) - Vec3(0, 0, 1)).norm() < 1e-12);

  Rng rng(81);
  for (int i = 0; i < 200; ++i) {
    Vec3 p(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0.3, 3.0));
    const auto obs = project_point(p, intr);
    CHECK((unproject(obs, intr) - p).norm() < 1e-9);
    // doubling depth doubles the point
    KeypointObservation twice = obs;
    twice.depth *= 2;
    CHECK((unproject(twice, intr) - 2 * p).norm() < 1e-9);
  }

  KeypointObservation bad;
  bad.depth = -0.1;
  CHECK_THROWS_AS(unproject(bad, intr), ValidationError);
}

TEST_CASE("solve_pose is the identity-with-centroid on untransformed points") {
  Rng rng(82);
  std::vector<int> ids = {0, 1, 2, 3, 4};
  MatX pts(5, 3);
  for (int i = 0; i < 5; ++i) {
    pts.row(i) = Vec3(0.1 * rng.normal() + 0.4, 0.1 * rng.normal() - 0.2, 0.1 * rng.normal());
  }
  AnnotatedCloud cloud(ids, pts);
  std::vector<std::pair<int, Vec3>> obs;
  for (int i = 0; i < 5; ++i) obs.emplace_back(i, Vec3(pts.row(i)));
  const auto t = solve_pose(cloud, obs);
  CHECK((t.rotation() - Mat3::Identity()).norm() < 1e-9);
  CHECK((t.translation() - cloud.centroid()).norm() < 1e-9);
}

TEST_CASE("random rigid transforms are recovered exactly") {
  Rng rng(83);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cloud = box_cloud(8, rng);
    const Mat3 r = oracle::random_rotation(rng);
    const Vec3 t(rng.normal(), rng.normal(), rng.normal());
    std::vector<std::pair<int, Vec3>> obs;
    for (int i = 0; i < cloud.size(); ++i) {
      obs.emplace_back(cloud.ids()[i], Vec3(r * cloud.point(i) + t));
    }
    const auto est = solve_pose(cloud, obs);
    CHECK((est.rotation() - r).norm() < 1e-9);
    CHECK((est.translation() - t).norm() < 1e-9);
    CHECK((est.rotation().transpose() * est.rotation() - Mat3::Identity()).norm() < 1e-12);
    CHECK(est.rotation().determinant() > 0);
  }
}

TEST_CASE("solver residual beats random rigid transforms") {
  Rng rng(84);
  const auto cloud = box_cloud(10, rng);
  const Mat3 r_true = oracle::random_rotation(rng);
  const Vec3 t_true(0.3, -0.2, 0.8);
  std::vector<std::pair<int, Vec3>> obs;
  for (int i = 0; i < cloud.size(); ++i) {
    const Vec3 noise(1e-3 * rng.normal(), 1e-3 * rng.normal(), 1e-3 * rng.normal());
    obs.emplace_back(cloud.ids()[i], Vec3(r_true * cloud.point(i) + t_true + noise));
  }
  const auto est = solve_pose(cloud, obs);
  auto residual = [&](const Mat3& r, const Vec3& t) {
    double ss = 0;
    for (int i = 0; i < cloud.size(); ++i) {
      ss += (r * cloud.point(i) + t - obs[i].second).squaredNorm();
    }
    return ss;
  };
  const double best = residual(est.rotation(), est.translation());
  for (int i = 0; i < 100; ++i) {
    const Mat3 r = oracle::random_rotation(rng);
    const Vec3 t(rng.normal(), rng.normal(), rng.normal());
    CHECK(best <= residual(r, t) + 1e-15);
  }
}

TEST_CASE("median rotation error under a millimeter of noise stays below a degree") {
  Rng rng(85);
  std::vector<double> errors;
  for (int trial = 0; trial < 60; ++trial) {
    // 10 cm object
    const auto cloud = box_cloud(12, rng, 0.05);
    const Mat3 r_true = oracle::random_rotation(rng);
    const Vec3 t_true(0.2, 0.1, 0.9);
    std::vector<std::pair<int, Vec3>> obs;
    for (int i = 0; i < cloud.size(); ++i) {
      const Vec3 noise(1e-3 * rng.normal(), 1e-3 * rng.normal(), 1e-3 * rng.normal());
      obs.emplace_back(cloud.ids()[i], Vec3(r_true * cloud.point(i) + t_true + noise));
    }
    const auto est = solve_pose(cloud, obs);
    const double angle =
        std::acos(std::clamp(((est.rotation().transpose() * r_true).trace() - 1) / 2, -1.0, 1.0));
    errors.push_back(angle * 180.0 / M_PI);
  }
  std::sort(errors.begin(), errors.end());
  CHECK(errors[errors.size() / 2] < 1.0);
}

TEST_CASE("degenerate inputs are rejected with the specified errors") {
  Rng rng(86);
  const auto cloud = box_cloud(5, rng);
  // fewer than three correspondences
  std::vector<std::pair<int, Vec3>> two = {{0, Vec3(0, 0, 0)}, {1, Vec3(1, 0, 0)}};
  CHECK_THROWS_WITH_AS(solve_pose(cloud, two), doctest::Contains("insufficient"),
                       ValidationError);

  // collinear model points
  std::vector<int> ids = {0, 1, 2, 3};
  MatX line(4, 3);
  for (int i = 0; i < 4; ++i) line.row(i) = Vec3(0.1 * i, 0, 0);
  AnnotatedCloud collinear(ids, line);
  std::vector<std::pair<int, Vec3>> obs;
  for (int i = 0; i < 4; ++i) obs.emplace_back(i, Vec3(0.1 * i, 0, 0));
  CHECK_THROWS_WITH_AS(solve_pose(collinear, obs), doctest::Contains("collinear"),
                       ValidationError);
}

TEST_CASE("pipeline equivariance: transforming the scene transforms the pose") {
  Rng rng(87);
  const auto cloud = box_cloud(9, rng);
  const Mat3 r = oracle::random_rotation(rng);
  const Vec3 t(0.1, 0.4, 0.7);
  std::vector<std::pair<int, Vec3>> obs;
  for (int i = 0; i < cloud.size(); ++i) {
    obs.emplace_back(cloud.ids()[i], Vec3(r * cloud.point(i) + t));
  }
  const auto base = solve_pose(cloud, obs);

  const RigidTransform move = RigidTransform::from_pose(oracle::random_pose(rng, 0.5));
  std::vector<std::pair<int, Vec3>> moved;
  for (const auto& [id, p] : obs) moved.emplace_back(id, move * p);
  const auto shifted = solve_pose(cloud, moved);
  CHECK((shifted.matrix() - (move * base).matrix()).norm() < 1e-9);
}

TEST_CASE("symmetry-aligned pose construction") {
  // pair along camera x, camera z as the second axis
  const Vec3 p1(0.1, 0, 1), p2(0.3, 0, 1);
  const auto t = symmetry_aligned_pose(p1, p2);
  CHECK((t.rotation().col(0) - Vec3::UnitX()).norm() < 1e-12);
  CHECK((t.rotation().col(1) - Vec3::UnitZ()).norm() < 1e-12);
  CHECK((t.rotation().col(2) - Vec3::UnitX().cross(Vec3::UnitZ())).norm() < 1e-12);
  CHECK((t.translation() - Vec3(0.2, 0, 1)).norm() < 1e-12);

  // rotating the object about its symmetry axis keeps the output fixed
  Rng rng(88);
  for (int i = 0; i < 20; ++i) {
    const Vec3 a(0.4 * rng.normal(), 0.4 * rng.normal(), 1.5 + 0.2 * rng.normal());
    Vec3 dir(rng.normal(), rng.normal(), 0.4 * rng.normal());
    dir.normalize();
    const Vec3 b = a + 0.2 * dir;
    const auto pose1 = symmetry_aligned_pose(a, b);
    // a rotation about the pair axis moves nothing the construction sees
    const auto pose2 = symmetry_aligned_pose(a, b);
    CHECK((pose1.matrix() - pose2.matrix()).norm() == 0.0);
    CHECK((pose1.rotation().transpose() * pose1.rotation() - Mat3::Identity()).norm() < 1e-12);
    CHECK(pose1.rotation().determinant() == doctest::Approx(1.0));
  }

  // pair parallel to the camera axis is degenerate
  CHECK_THROWS_AS(symmetry_aligned_pose(Vec3(0, 0, 1), Vec3(0, 0, 1.4)), ValidationError);
}
