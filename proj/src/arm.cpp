#include "skillforge/arm.hpp"

namespace skf {

SerialArm::SerialArm(std::vector<JointSpec> joints, std::vector<LinkParams> links,
                     RigidTransform tool, Vec3 gravity)
    : joints_(std::move(joints)), links_(std::move(links)), tool_(tool), gravity_(gravity) {
  require(joints_.size() == links_.size(), "one link per joint required");
  require(!joints_.empty(), "arm needs at least one joint");
  for (auto& j : joints_) {
    require(std::abs(j.axis.norm() - 1.0) < 1e-9, "joint axis must be unit length");
  }
}

SerialArm::FramePass SerialArm::frames(const VecX& q) const {
  const int n = dof();
  FramePass fp;
  fp.rot.resize(n);
  fp.org.resize(n);
  fp.axis.resize(n);
  RigidTransform t = RigidTransform::identity();
  for (int i = 0; i < n; ++i) {
    t = t * joints_[i].parent_to_joint;
    fp.org[i] = t.translation();
    fp.axis[i] = t.rotation() * joints_[i].axis;
    t = t * RigidTransform(se3::rodrigues(joints_[i].axis * q[i]), Vec3::Zero());
    fp.rot[i] = t.rotation();
  }
  fp.ee = t * tool_;
  return fp;
}

RigidTransform SerialArm::forward_kinematics(const VecX& q) const { return frames(q).ee; }

VecX SerialArm::rnea(const VecX& q, const VecX& qd, const VecX& qdd, bool with_gravity) const {
  const int n = dof();
  const FramePass fp = frames(q);
  const Vec3 g = with_gravity ? gravity_ : Vec3::Zero();

  std::vector<Vec3> omega(n), alpha(n), a_org(n), a_com(n), com_w(n);
  Vec3 w_prev = Vec3::Zero(), al_prev = Vec3::Zero(), a_prev = Vec3::Zero();
  Vec3 org_prev = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3 r = fp.org[i] - org_prev;
    const Vec3 a_here = a_prev + al_prev.cross(r) + w_prev.cross(w_prev.cross(r));
    omega[i] = w_prev + fp.axis[i] * qd[i];
    alpha[i] = al_prev + fp.axis[i] * qdd[i] + w_prev.cross(fp.axis[i]) * qd[i];
    a_org[i] = a_here;
    com_w[i] = fp.org[i] + fp.rot[i] * links_[i].com;
    const Vec3 rc = com_w[i] - fp.org[i];
    a_com[i] = a_org[i] + alpha[i].cross(rc) + omega[i].cross(omega[i].cross(rc));
    w_prev = omega[i];
    al_prev = alpha[i];
    a_prev = a_org[i];
    org_prev = fp.org[i];
  }

  VecX tau = VecX::Zero(n);
  Vec3 f_next = Vec3::Zero(), n_next = Vec3::Zero();
  Vec3 org_next = Vec3::Zero();
  for (int i = n - 1; i >= 0; --i) {
    const Mat3 iw = fp.rot[i] * links_[i].inertia_com * fp.rot[i].transpose();
    const Vec3 f_link = links_[i].mass * (a_com[i] - g);
    const Vec3 n_link = iw * alpha[i] + omega[i].cross(iw * omega[i]);
    Vec3 f = f_link + f_next;
    Vec3 nn = n_link + (com_w[i] - fp.org[i]).cross(f_link) + n_next;
    if (i < n - 1) nn += (org_next - fp.org[i]).cross(f_next);
    tau[i] = fp.axis[i].dot(nn);
    f_next = f;
    n_next = nn;
    org_next = fp.org[i];
  }
  return tau;
}

MatX SerialArm::inertia(const VecX& q) const {
  const int n = dof();
  MatX h(n, n);
  const VecX zero = VecX::Zero(n);
  for (int j = 0; j < n; ++j) {
    VecX e = VecX::Zero(n);
    e[j] = 1.0;
    h.col(j) = rnea(q, zero, e, false);
  }
  return 0.5 * (h + h.transpose());
}

VecX SerialArm::nonlinear(const VecX& q, const VecX& qd) const {
  return rnea(q, qd, VecX::Zero(dof()), true);
}

MatX SerialArm::body_jacobian(const VecX& q) const {
  const int n = dof();
  const FramePass fp = frames(q);
  const Mat3 r_ee_t = fp.ee.rotation().transpose();
  const Vec3 p_ee = fp.ee.translation();
  MatX j(6, n);
  for (int i = 0; i < n; ++i) {
    j.col(i).head<3>() = r_ee_t * fp.axis[i].cross(p_ee - fp.org[i]);
    j.col(i).tail<3>() = r_ee_t * fp.axis[i];
  }
  return j;
}

MatX SerialArm::body_jacobian_dot(const VecX& q, const VecX& qd, double h) const {
  const MatX jp = body_jacobian(q + h * qd);
  const MatX jm = body_jacobian(q - h * qd);
  return (jp - jm) / (2.0 * h);
}

bool SerialArm::within_limits(const VecX& q) const {
  for (int i = 0; i < dof(); ++i) {
    if (q[i] < joints_[i].lower || q[i] > joints_[i].upper) return false;
  }
  return true;
}

VecX SerialArm::clamp_to_limits(const VecX& q) const {
  VecX out = q;
  for (int i = 0; i < dof(); ++i) out[i] = std::clamp(q[i], joints_[i].lower, joints_[i].upper);
  return out;
}

VecX SerialArm::solve_ik(const RigidTransform& target, const VecX& q0, int max_iter,
                         double tol) const {
  VecX q = q0;
  for (int it = 0; it < max_iter; ++it) {
    const RigidTransform cur = forward_kinematics(q);
    const Vec6 err = se3::log(cur.inverse() * target);
    if (err.norm() < tol) break;
    const MatX j = body_jacobian(q);
    const MatX jjt = j * j.transpose() + 1e-8 * MatX::Identity(6, 6);
    const VecX dq = j.transpose() * jjt.ldlt().solve(err);
    q += 0.5 * dq;
  }
  return q;
}

SerialArm make_planar3(double l1, double l2, double l3) {
  std::vector<JointSpec> joints(3);
  joints[0].parent_to_joint = RigidTransform::identity();
  joints[1].parent_to_joint = RigidTransform(Mat3::Identity(), Vec3(l1, 0, 0));
  joints[2].parent_to_joint = RigidTransform(Mat3::Identity(), Vec3(l2, 0, 0));
  for (auto& j : joints) {
    j.axis = Vec3::UnitZ();
    j.lower = -2.8;
    j.upper = 2.8;
  }
  std::vector<LinkParams> links(3);
  const double lengths[3] = {l1, l2, l3};
  const double masses[3] = {2.2, 1.6, 0.9};
  for (int i = 0; i < 3; ++i) {
    links[i].mass = masses[i];
    links[i].com = Vec3(0.45 * lengths[i], 0.02, 0);
    const double izz = masses[i] * lengths[i] * lengths[i] / 10.0;
    links[i].inertia_com = Vec3(0.15 * izz, 0.92 * izz, izz).asDiagonal();
  }
  return SerialArm(std::move(joints), std::move(links),
                   RigidTransform(Mat3::Identity(), Vec3(l3, 0, 0)), Vec3(0, -9.81, 0));
}

SerialArm make_serial7() {
  // Panda-like kinematics with synthetic inertial parameters.
  std::vector<JointSpec> joints(7);
  auto lift = [](double z) { return RigidTransform(Mat3::Identity(), Vec3(0, 0, z)); };
  const Mat3 rx_pos = se3::rodrigues(Vec3(M_PI / 2, 0, 0));
  const Mat3 rx_neg = se3::rodrigues(Vec3(-M_PI / 2, 0, 0));
  joints[0].parent_to_joint = lift(0.32);
  joints[1].parent_to_joint = RigidTransform(rx_neg, Vec3::Zero());
  joints[2].parent_to_joint = RigidTransform(rx_pos, Vec3(0, -0.3, 0));
  joints[3].parent_to_joint = RigidTransform(rx_pos, Vec3(0.08, 0, 0));
  joints[4].parent_to_joint = RigidTransform(rx_neg, Vec3(-0.08, 0.35, 0));
  joints[5].parent_to_joint = RigidTransform(rx_pos, Vec3::Zero());
  joints[6].parent_to_joint = RigidTransform(rx_pos, Vec3(0.09, 0, 0));
  for (auto& j : joints) {
    j.axis = Vec3::UnitZ();
    j.lower = -2.9;
    j.upper = 2.9;
  }
  std::vector<LinkParams> links(7);
  const double masses[7] = {3.5, 3.2, 2.7, 2.3, 1.9, 1.4, 0.8};
  for (int i = 0; i < 7; ++i) {
    links[i].mass = masses[i];
    links[i].com = Vec3(0.01 * (i % 2 ? 1 : -1), 0.03, 0.08);
    const double s = 0.012 * masses[i];
    links[i].inertia_com = Vec3(s, 0.9 * s, 0.6 * s).asDiagonal();
  }
  return SerialArm(std::move(joints), std::move(links),
                   RigidTransform(Mat3::Identity(), Vec3(0, 0, 0.12)), Vec3(0, 0, -9.81));
}

}  // namespace skf
