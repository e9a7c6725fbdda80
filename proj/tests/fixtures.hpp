#pragma once

// Shared hand-built model fixtures for sequencing and planning tests.

#include "skillforge/compose.hpp"

namespace fixtures {

using namespace skf;

inline Pose pose_xyz(double x, double y, double z, double yaw = 0) {
  Pose p;
  p.position = Vec3(x, y, z);
  p.orientation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), yaw);
  return p;
}

inline PoseGaussian tight_gaussian(const Pose& mean, double var = 1e-3) {
  return PoseGaussian{mean, var * MatX::Identity(6, 6)};
}

inline FrameGaussianSet global_set(const Pose& mean, double var = 1e-3) {
  FrameGaussianSet s;
  s.frame_ids = {"global"};
  s.gaussians = {tight_gaussian(mean, var)};
  return s;
}

// Single-entry skill with `branches` final components hanging off one start
// component. Branch b ends at `branch_poses[b]`.
inline SkillModel branching_skill(const std::string& id, const Pose& start,
                                  const std::vector<Pose>& branch_poses) {
  const int k = 1 + static_cast<int>(branch_poses.size());
  SkillModel s;
  s.id = id;
  TpGmm gmm;
  gmm.priors = VecX::Constant(k, 1.0 / k);
  gmm.frame_ids = {"global"};
  gmm.components.push_back({tight_gaussian(start)});
  for (const auto& p : branch_poses) gmm.components.push_back({tight_gaussian(p)});
  s.hsmm.gmm = gmm;
  s.hsmm.transitions = MatX::Zero(k, k);
  for (int b = 1; b < k; ++b) s.hsmm.transitions(0, b) = 1.0 / (k - 1);
  s.hsmm.initial = VecX::Zero(k);
  s.hsmm.initial[0] = 1.0;
  s.hsmm.durations.assign(k, DurationModel{4, 1});
  for (int b = 1; b < k; ++b) s.hsmm.final_states.push_back(b);
  s.hsmm.final_weight = VecX::Zero(k);
  for (int b = 1; b < k; ++b) s.hsmm.final_weight[b] = 1.0;
  s.hsmm.validate();

  s.cond.init_frame_ids = {"global"};
  s.cond.final_frame_ids = {"global"};
  s.cond.precondition[0] = global_set(start);
  for (int b = 1; b < k; ++b) {
    s.cond.final_condition[b] = global_set(branch_poses[b - 1]);
    s.cond.effect[b]["ee"] = global_set(branch_poses[b - 1]);
  }
  s.cond.validate();
  return s;
}

// Two-component left-right skill from `from` to `to`.
inline SkillModel chain_skill(const std::string& id, const Pose& from, const Pose& to) {
  SkillModel s;
  s.id = id;
  TpGmm gmm;
  gmm.priors = VecX::Constant(2, 0.5);
  gmm.frame_ids = {"global"};
  gmm.components.push_back({tight_gaussian(from)});
  gmm.components.push_back({tight_gaussian(to)});
  s.hsmm.gmm = gmm;
  s.hsmm.transitions = MatX::Zero(2, 2);
  s.hsmm.transitions(0, 1) = 1.0;
  s.hsmm.initial = (VecX(2) << 1, 0).finished();
  s.hsmm.durations.assign(2, DurationModel{4, 1});
  s.hsmm.final_states = {1};
  s.hsmm.final_weight = (VecX(2) << 0, 1).finished();
  s.hsmm.validate();

  s.cond.init_frame_ids = {"global"};
  s.cond.final_frame_ids = {"global"};
  s.cond.precondition[0] = global_set(from);
  s.cond.final_condition[1] = global_set(to);
  s.cond.effect[1]["ee"] = global_set(to);
  s.cond.validate();
  return s;
}

// Two-component skill expressed in the robot (start end-effector) frame:
// moves from `from_rel` to `to_rel` relative to wherever it starts.
inline SkillModel relative_chain_skill(const std::string& id, const Pose& from_rel,
                                       const Pose& to_rel) {
  SkillModel s;
  s.id = id;
  TpGmm gmm;
  gmm.priors = VecX::Constant(2, 0.5);
  gmm.frame_ids = {"robot"};
  gmm.components.push_back({tight_gaussian(from_rel)});
  gmm.components.push_back({tight_gaussian(to_rel)});
  s.hsmm.gmm = gmm;
  s.hsmm.transitions = MatX::Zero(2, 2);
  s.hsmm.transitions(0, 1) = 1.0;
  s.hsmm.initial = (VecX(2) << 1, 0).finished();
  s.hsmm.durations.assign(2, DurationModel{4, 1});
  s.hsmm.final_states = {1};
  s.hsmm.final_weight = (VecX(2) << 0, 1).finished();
  s.hsmm.validate();

  s.cond.init_frame_ids = {"global", "robot"};
  s.cond.final_frame_ids = {"robot"};
  FrameGaussianSet pre;
  pre.frame_ids = {"global", "robot"};
  pre.gaussians = {tight_gaussian(Pose::identity(), 10.0), tight_gaussian(from_rel, 1e-2)};
  s.cond.precondition[0] = pre;
  s.cond.final_condition[1] = FrameGaussianSet{{"robot"}, {tight_gaussian(to_rel)}};
  FrameGaussianSet eff;
  eff.frame_ids = {"global", "robot"};
  eff.gaussians = {tight_gaussian(Pose::identity(), 10.0), tight_gaussian(to_rel, 1e-2)};
  s.cond.effect[1]["ee"] = eff;
  s.cond.validate();
  return s;
}

}  // namespace fixtures
