#pragma once

#include <memory>
#include <string>
#include <vector>

#include "skillforge/manifold.hpp"

namespace skf {

// Physical inertial description of one link, in its own frame.
struct LinkParams {
  double mass = 1.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia_com = 1e-3 * Mat3::Identity();
};

// Revolute joint: fixed parent-to-joint transform plus a unit rotation axis
// in the joint frame.
struct JointSpec {
  RigidTransform parent_to_joint;
  Vec3 axis = Vec3::UnitZ();
  double lower = -3.0, upper = 3.0;  // rad
};

// Serial-chain manipulator with full Newton-Euler dynamics. Task-space
// quantities use body twists [v, w] at the end-effector.
class SerialArm {
 public:
  SerialArm(std::vector<JointSpec> joints, std::vector<LinkParams> links,
            RigidTransform tool = RigidTransform::identity(),
            Vec3 gravity = Vec3(0, 0, -9.81));

  int dof() const { return static_cast<int>(joints_.size()); }
  const Vec3& gravity() const { return gravity_; }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const std::vector<LinkParams>& links() const { return links_; }

  RigidTransform forward_kinematics(const VecX& q) const;

  // Inverse dynamics: tau = H(q) qdd + N(q, qd) with gravity included in N.
  VecX rnea(const VecX& q, const VecX& qd, const VecX& qdd, bool with_gravity = true) const;

  MatX inertia(const VecX& q) const;
  VecX nonlinear(const VecX& q, const VecX& qd) const;

  // 6 x n body Jacobian at the end-effector ([v, w] in the EE frame).
  MatX body_jacobian(const VecX& q) const;
  MatX body_jacobian_dot(const VecX& q, const VecX& qd, double h = 1e-6) const;

  bool within_limits(const VecX& q) const;
  VecX clamp_to_limits(const VecX& q) const;

  // Damped-least-squares inverse kinematics from an initial guess.
  VecX solve_ik(const RigidTransform& target, const VecX& q0, int max_iter = 200,
                double tol = 1e-11) const;

 private:
  struct FramePass {
    std::vector<Mat3> rot;   // world rotation per link
    std::vector<Vec3> org;   // joint origin per link
    std::vector<Vec3> axis;  // world joint axis
    RigidTransform ee;
  };
  FramePass frames(const VecX& q) const;

  std::vector<JointSpec> joints_;
  std::vector<LinkParams> links_;
  RigidTransform tool_;
  Vec3 gravity_;
};

// Desk-scale fixtures: a planar three-link arm (z-axes, links along x,
// gravity in -y) and a seven-joint spatial chain with synthetic inertias.
SerialArm make_planar3(double l1 = 0.4, double l2 = 0.35, double l3 = 0.25);
SerialArm make_serial7();

}  // namespace skf
