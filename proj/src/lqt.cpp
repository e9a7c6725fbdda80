#include "skillforge/lqt.hpp"

namespace skf {

std::vector<RigidTransform> to_se3_trajectory(const PoseTrajectory& traj) {
  std::vector<RigidTransform> out;
  out.reserve(traj.steps.size());
  for (const auto& s : traj.steps) out.push_back(RigidTransform::from_pose(s.pose));
  return out;
}

}  // namespace skf
