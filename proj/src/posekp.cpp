#include "skillforge/posekp.hpp"

#include <Eigen/SVD>
#include <map>

namespace skf {

AnnotatedCloud::AnnotatedCloud(std::vector<int> ids, MatX points) : ids_(std::move(ids)) {
  require(points.cols() == 3, "annotated cloud must be N x 3");
  require(points.rows() == static_cast<int>(ids_.size()), "id/point count mismatch");
  centroid_ = points.colwise().mean();
  centered_ = points.rowwise() - centroid_.transpose();
  require(centered_.colwise().mean().norm() < 1e-9, "centering failed");
}

std::vector<KeypointObservation> filter_by_confidence(
    const std::vector<KeypointObservation>& obs, double c_low) {
  require(c_low >= 0 && c_low < 1, "confidence threshold must lie in [0, 1)");
  std::vector<KeypointObservation> out;
  for (const auto& o : obs) {
    if (o.confidence >= c_low) out.push_back(o);
  }
  return out;
}

Vec3 unproject(const KeypointObservation& obs, const CameraIntrinsics& intr) {
  intr.validate();
  require(obs.depth > 0, "nonpositive depth for keypoint " + std::to_string(obs.keypoint_id));
  return Vec3((obs.u - intr.cx) * obs.depth / intr.fx, (obs.v - intr.cy) * obs.depth / intr.fy,
              obs.depth);
}

KeypointObservation project_point(const Vec3& p, const CameraIntrinsics& intr) {
  intr.validate();
  require(p.z() > 0, "point behind the camera");
  KeypointObservation o;
  o.u = intr.fx * p.x() / p.z() + intr.cx;
  o.v = intr.fy * p.y() / p.z() + intr.cy;
  o.depth = p.z();
  return o;
}

RigidTransform solve_pose(const AnnotatedCloud& model,
                          const std::vector<std::pair<int, Vec3>>& observed) {
  std::map<int, Vec3> by_id(observed.begin(), observed.end());
  std::vector<Vec3> a, b;
  for (int i = 0; i < model.size(); ++i) {
    const auto it = by_id.find(model.ids()[i]);
    if (it == by_id.end()) continue;
    a.push_back(model.point(i));
    b.push_back(it->second);
  }
  const int m = static_cast<int>(a.size());
  if (m < 3) {
    throw ValidationError("insufficient correspondences: need at least 3, have " +
                          std::to_string(m));
  }
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (int i = 0; i < m; ++i) {
    ca += a[i];
    cb += b[i];
  }
  ca /= m;
  cb /= m;
  Mat3 h = Mat3::Zero();
  MatX a_centered(m, 3);
  for (int i = 0; i < m; ++i) {
    h += (a[i] - ca) * (b[i] - cb).transpose();
    a_centered.row(i) = a[i] - ca;
  }
  // collinearity: the second singular value of the centered model vanishes
  Eigen::JacobiSVD<MatX> shape(a_centered);
  const double s0 = shape.singularValues()[0];
  const double s1 = shape.singularValues()[1];
  if (!(s1 > 1e-9 * std::max(s0, 1e-12))) {
    throw ValidationError("degenerate configuration: correspondences are collinear");
  }

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() > 0 ? 1.0 : -1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  const Vec3 t = cb - r * ca;
  return RigidTransform(r, t);
}

RigidTransform symmetry_aligned_pose(const Vec3& p1, const Vec3& p2, const Vec3& camera_z) {
  require((p2 - p1).norm() > 1e-12, "keypoint pair must be distinct");
  const Vec3 axis1 = (p2 - p1).normalized();
  const Vec3 zc = camera_z.normalized();
  if (axis1.cross(zc).norm() < 1e-6) {
    throw ValidationError("keypoint pair is parallel to the camera axis");
  }
  const Vec3 axis2 = (zc - zc.dot(axis1) * axis1).normalized();
  const Vec3 axis3 = axis1.cross(axis2);
  Mat3 r;
  r.col(0) = axis1;
  r.col(1) = axis2;
  r.col(2) = axis3;
  return RigidTransform(r, 0.5 * (p1 + p2));
}

}  // namespace skf
