#pragma once

#include <string>
#include <vector>

#include "skillforge/types.hpp"

namespace skf {

// One detected keypoint: image coordinates, depth, and the confidence
// c = exp(-dist/eta) assigned by the descriptor matcher (or its synthetic
// stand-in).
struct KeypointObservation {
  std::string object_id;
  int keypoint_id = 0;
  double u = 0, v = 0;   // pixels
  double depth = 0;      // meters
  double confidence = 1;  // in [0, 1]
};

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;

  void validate() const { require(fx > 0 && fy > 0, "focal lengths must be positive"); }
};

// Object-specific annotated point cloud, centered so that its columns have
// zero mean; the removed centroid is kept for pose reconstruction.
class AnnotatedCloud {
 public:
  AnnotatedCloud(std::vector<int> ids, MatX points);  // points: N x 3, raw

  int size() const { return static_cast<int>(ids_.size()); }
  const std::vector<int>& ids() const { return ids_; }
  const MatX& centered() const { return centered_; }
  const Vec3& centroid() const { return centroid_; }
  Vec3 point(int row) const { return centered_.row(row); }

 private:
  std::vector<int> ids_;
  MatX centered_;
  Vec3 centroid_;
};

std::vector<KeypointObservation> filter_by_confidence(
    const std::vector<KeypointObservation>& obs, double c_low);

Vec3 unproject(const KeypointObservation& obs, const CameraIntrinsics& intr);
// inverse of unproject, used by tests and synthetic generators
KeypointObservation project_point(const Vec3& p, const CameraIntrinsics& intr);

// Least-squares rigid transform T with T * model point = observed point,
// matched by keypoint id. SVD Procrustes with reflection correction.
RigidTransform solve_pose(const AnnotatedCloud& model,
                          const std::vector<std::pair<int, Vec3>>& observed);

// Frame completion for rotation-symmetric objects: the first axis follows the
// keypoint pair, the second is the camera z-axis projected orthogonal to it,
// the third completes the right-handed frame. Position is the pair midpoint.
RigidTransform symmetry_aligned_pose(const Vec3& p1, const Vec3& p2,
                                     const Vec3& camera_z = Vec3::UnitZ());

}  // namespace skf
