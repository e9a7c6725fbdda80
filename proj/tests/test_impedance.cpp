#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "skillforge/impedance.hpp"

using namespace skf;

namespace {

ImpedanceGains default_gains(bool op_space) {
  ImpedanceGains g;
  VecX k(6);
  k << 400, 400, 400, 40, 40, 40;
  g.stiffness = SpdMatrix::diagonal(k);
  g.damping = SpdMatrix(MatX(2.0 * g.stiffness.sqrt()));
  g.operational_space_inertia = op_space;
  g.desired_inertia = SpdMatrix::identity(6);
  return g;
}

// min-jerk scalar profile
double minjerk(double s) { return 10 * s * s * s - 15 * s * s * s * s + 6 * std::pow(s, 5); }

std::vector<RigidTransform> geodesic_reference(const RigidTransform& from,
                                               const RigidTransform& to, int steps) {
  const Vec6 delta = se3::log(from.inverse() * to);
  std::vector<RigidTransform> refs;
  for (int i = 0; i < steps; ++i) {
    const double s = minjerk(static_cast<double>(i) / (steps - 1));
    refs.push_back(from * se3::exp(s * delta));
  }
  return refs;
}

}  // namespace

TEST_CASE("tracking error vanishes at the reference") {
  Rng rng(61);
  ControlState st;
  st.x_e = RigidTransform::from_pose(oracle::random_pose(rng, 0.4));
  st.x_d = st.x_e;
  for (int i = 0; i < 6; ++i) st.twist[i] = rng.normal();
  st.twist_d = st.twist;
  const auto err = tracking_error(st);
  CHECK((err.error_transform.matrix() - Mat4::Identity()).norm() < 1e-12);
  CHECK(err.error_twist.norm() < 1e-12);
}

TEST_CASE("pure translation offset appears in the end-effector frame") {
  Rng rng(62);
  const Mat3 r = oracle::random_rotation(rng);
  const Vec3 p(0.2, -0.1, 0.4);
  const Vec3 d(0.05, 0.02, -0.03);
  ControlState st;
  st.x_e = RigidTransform(r, p);
  st.x_d = RigidTransform(r, p + d);
  const auto err = tracking_error(st);
  const Vec6 log_e = se3::log(err.error_transform);
  CHECK((log_e.head<3>() - r.transpose() * d).norm() < 1e-12);
  CHECK(log_e.tail<3>().norm() < 1e-12);
}

TEST_CASE("error_rate matches numerical differentiation along a smooth path") {
  // analytic path for both the actual and desired frames
  Vec6 a, b;
  a << 0.3, -0.2, 0.1, 0.25, -0.15, 0.2;
  b << -0.1, 0.2, 0.15, -0.2, 0.1, 0.3;
  auto xe_of = [&](double t) { return se3::exp(t * a); };
  auto xd_of = [&](double t) { return se3::exp(Vec6(0.3 * b)) * se3::exp(t * 0.7 * b); };
  auto body_twist = [](const std::function<RigidTransform(double)>& f, double t, double h) {
    return Vec6(se3::log(f(t - h).inverse() * f(t + h)) / (2 * h));
  };
  const double t0 = 0.4, h = 1e-6;
  ControlState st;
  st.x_e = xe_of(t0);
  st.x_d = xd_of(t0);
  st.twist = body_twist(xe_of, t0, h);
  st.twist_d = body_twist(xd_of, t0, h);
  const Vec6 cdot = (body_twist(xe_of, t0 + h, h) - body_twist(xe_of, t0 - h, h)) / (2 * h);
  const Vec6 cdot_d = (body_twist(xd_of, t0 + h, h) - body_twist(xd_of, t0 - h, h)) / (2 * h);

  const auto err = tracking_error(st);
  auto e_of = [&](double t) {
    ControlState s;
    s.x_e = xe_of(t);
    s.x_d = xd_of(t);
    s.twist = body_twist(xe_of, t, h);
    s.twist_d = body_twist(xd_of, t, h);
    return tracking_error(s).error_twist;
  };
  const Vec6 e_dot_fd = (e_of(t0 + 1e-5) - e_of(t0 - 1e-5)) / (2e-5);
  const Vec6 e_dot = error_rate(err, cdot, st.twist_d, cdot_d);
  CHECK((e_dot - e_dot_fd).norm() < 1e-4);
}

TEST_CASE("desired error dynamics: equilibrium, static offset, constructed balance") {
  const auto gains = default_gains(false);
  TrackingError eq;
  eq.error_transform = RigidTransform::identity();
  eq.error_twist = Vec6::Zero();
  CHECK(desired_error_dynamics(eq, Vec6::Zero(), MatX::Identity(6, 6), gains, Vec6::Zero())
            .norm() == 0.0);

  Rng rng(63);
  TrackingError off;
  off.error_transform = RigidTransform::from_pose(oracle::random_pose(rng, 0.05));
  off.error_twist = Vec6::Zero();
  const Vec6 z = desired_error_dynamics(off, Vec6::Zero(), MatX::Identity(6, 6), gains,
                                        Vec6::Zero());
  CHECK((z - gains.stiffness.m() * se3::log(off.error_transform)).norm() < 1e-12);

  // feedforward wrench constructed to cancel the spring term exactly
  const Mat6 adt = se3::adjoint(off.error_transform.inverse()).transpose();
  const Vec6 f_ff = adt.inverse() * (gains.stiffness.m() * se3::log(off.error_transform));
  const Vec6 z2 =
      desired_error_dynamics(off, Vec6::Zero(), MatX::Identity(6, 6), gains, f_ff);
  CHECK(z2.norm() < 1e-9);
}

TEST_CASE("control input reduces to the desired acceleration at zero error") {
  TrackingError eq;
  eq.error_transform = RigidTransform::identity();
  eq.error_twist = Vec6::Zero();
  Vec6 cdot_d;
  cdot_d << 1, 2, 3, 4, 5, 6;
  CHECK((control_input(Vec6::Zero(), eq, Vec6::Zero(), cdot_d) - cdot_d).norm() == 0.0);

  Rng rng(64);
  TrackingError err;
  err.error_transform = RigidTransform::from_pose(oracle::random_pose(rng, 0.1));
  Vec6 z;
  for (int i = 0; i < 6; ++i) {
    z[i] = rng.normal();
    err.error_twist[i] = rng.normal();
  }
  // zero desired motion: u = Z
  CHECK((control_input(z, err, Vec6::Zero(), Vec6::Zero()) - z).norm() == 0.0);
}

TEST_CASE("inverse dynamics drop out of the computed-torque law") {
  const SerialArm arm = make_planar3();
  Rng rng(65);
  VecX q(3), qd(3), qdd_des(3);
  for (int i = 0; i < 3; ++i) {
    q[i] = 0.4 + 0.3 * rng.normal();
    qd[i] = 0.5 * rng.normal();
    qdd_des[i] = rng.normal();
  }
  const MatX j = arm.body_jacobian(q);
  const MatX jdot = arm.body_jacobian_dot(q, qd);
  const Vec6 u = j * qdd_des + jdot * qd;
  auto gains = default_gains(false);
  const auto res = computed_torque(u, arm, q, qd, Vec6::Zero(), gains);
  const VecX expected = arm.inertia(q) * qdd_des + arm.nonlinear(q, qd);
  CHECK((res.torque - expected).norm() < 1e-6 * std::max(1.0, expected.norm()));
}

TEST_CASE("operational-space desired inertia removes the measured wrench") {
  const SerialArm arm = make_serial7();
  Rng rng(66);
  VecX q(7), qd(7);
  for (int i = 0; i < 7; ++i) {
    q[i] = 0.5 + 0.3 * rng.normal();
    qd[i] = 0.3 * rng.normal();
  }
  Vec6 f_ext;
  f_ext << 8, -5, 12, 0.8, -0.5, 0.4;

  const auto gains = default_gains(true);
  ControlState st;
  st.x_e = arm.forward_kinematics(q);
  st.x_d = st.x_e * se3::exp((Vec6() << 0.03, -0.02, 0.04, 0.05, 0.02, -0.04).finished());
  st.twist = arm.body_jacobian(q) * qd;

  const auto err = tracking_error(st);
  const MatX m_d = operational_space_inertia(arm, q);

  TorqueOptions opts;
  opts.damping_base = 1e-12;
  const Vec6 z1 = desired_error_dynamics(err, f_ext, m_d, gains, Vec6::Zero());
  const Vec6 u1 = control_input(z1, err, st.twist_d, st.accel_d);
  const auto t1 = computed_torque(u1, arm, q, qd, f_ext, gains, opts);

  const Vec6 z0 = desired_error_dynamics(err, Vec6::Zero(), m_d, gains, Vec6::Zero());
  const Vec6 u0 = control_input(z0, err, st.twist_d, st.accel_d);
  const auto t0 = computed_torque(u0, arm, q, qd, Vec6::Zero(), gains, opts);

  CHECK((t1.torque - t0.torque).norm() < 1e-9 * std::max(1.0, t0.torque.norm()));
}

TEST_CASE("nullspace attractor does not disturb the end-effector") {
  const SerialArm arm = make_serial7();
  Rng rng(67);
  VecX q(7), qd(7), q_ref(7);
  for (int i = 0; i < 7; ++i) {
    q[i] = 0.4 + 0.3 * rng.normal();
    qd[i] = 0.2 * rng.normal();
    q_ref[i] = 0.0;
  }
  auto gains = default_gains(true);
  TorqueOptions with_ns;
  with_ns.nullspace_reference = q_ref;
  with_ns.damping_base = 1e-12;
  TorqueOptions without_ns;
  without_ns.damping_base = 1e-12;

  Vec6 u;
  for (int i = 0; i < 6; ++i) u[i] = rng.normal();
  const auto ta = computed_torque(u, arm, q, qd, Vec6::Zero(), gains, with_ns);
  const auto tb = computed_torque(u, arm, q, qd, Vec6::Zero(), gains, without_ns);

  // resulting end-effector acceleration must be identical
  const MatX h = arm.inertia(q);
  const MatX j = arm.body_jacobian(q);
  const MatX jdot = arm.body_jacobian_dot(q, qd);
  const VecX nl = arm.nonlinear(q, qd);
  const Vec6 acc_a = j * h.ldlt().solve(ta.torque - nl) + jdot * qd;
  const Vec6 acc_b = j * h.ldlt().solve(tb.torque - nl) + jdot * qd;
  CHECK((acc_a - acc_b).norm() < 1e-8);
  CHECK((ta.torque - tb.torque).norm() > 1e-3);  // the nullspace did something
}

TEST_CASE("controller terms are invariant under a change of inertial frame") {
  Rng rng(68);
  const RigidTransform world_shift = RigidTransform::from_pose(oracle::random_pose(rng, 0.8));
  ControlState st;
  st.x_e = RigidTransform::from_pose(oracle::random_pose(rng, 0.4));
  st.x_d = RigidTransform::from_pose(oracle::random_pose(rng, 0.4));
  for (int i = 0; i < 6; ++i) {
    st.twist[i] = rng.normal();
    st.twist_d[i] = rng.normal();
    st.f_ext[i] = rng.normal();
  }
  ControlState moved = st;
  moved.x_e = world_shift * st.x_e;
  moved.x_d = world_shift * st.x_d;

  const auto gains = default_gains(false);
  const auto e1 = tracking_error(st);
  const auto e2 = tracking_error(moved);
  CHECK((e1.error_twist - e2.error_twist).norm() < 1e-12);
  const Vec6 z1 = desired_error_dynamics(e1, st.f_ext, MatX::Identity(6, 6), gains, st.f_ff);
  const Vec6 z2 = desired_error_dynamics(e2, st.f_ext, MatX::Identity(6, 6), gains, st.f_ff);
  CHECK((z1 - z2).norm() < 1e-12);
}

TEST_CASE("closed-loop error rate equals the desired dynamics") {
  const SerialArm arm = make_serial7();
  SimulationConfig cfg;
  cfg.gains = default_gains(true);
  cfg.q0 = (VecX(7) << 0.3, -0.4, 0.5, -1.2, 0.4, 1.0, 0.2).finished();
  cfg.dt = 1e-3;
  cfg.ref_dt = 1e-3;
  cfg.torque.damping_base = 1e-12;

  const RigidTransform start = arm.forward_kinematics(cfg.q0);
  const RigidTransform goal =
      start * se3::exp((Vec6() << 0.05, -0.04, 0.06, 0.15, -0.1, 0.1).finished());
  const auto refs = geodesic_reference(start, goal, 800);

  // verify the identity along the loop: cdot implied by the plant equals Z
  VecX q = cfg.q0, qd = VecX::Zero(7);
  for (int k = 0; k < 300; ++k) {
    const double t = k * cfg.dt;
    const int i = std::min<int>(static_cast<int>(t / cfg.ref_dt), refs.size() - 2);
    ControlState st;
    st.x_e = arm.forward_kinematics(q);
    st.x_d = refs[i];
    const MatX j = arm.body_jacobian(q);
    st.twist = j * qd;
    st.twist_d = se3::log(refs[i].inverse() * refs[i + 1]) / cfg.ref_dt;
    st.accel_d = Vec6::Zero();
    const auto err = tracking_error(st);
    const MatX m_d = operational_space_inertia(arm, q);
    const Vec6 z = desired_error_dynamics(err, Vec6::Zero(), m_d, cfg.gains, Vec6::Zero());
    const Vec6 u = control_input(z, err, st.twist_d, st.accel_d);
    const auto tr = computed_torque(u, arm, q, qd, Vec6::Zero(), cfg.gains, cfg.torque);

    const MatX h = arm.inertia(q);
    const VecX nl = arm.nonlinear(q, qd);
    const VecX qdd = h.ldlt().solve(tr.torque - nl);
    const Vec6 cdot = j * qdd + arm.body_jacobian_dot(q, qd) * qd;
    const Vec6 edot = error_rate(err, cdot, st.twist_d, st.accel_d);
    CHECK((edot - z).norm() < 1e-6 * std::max(1.0, z.norm()));

    qd += cfg.dt * qdd;
    q += cfg.dt * qd;
  }
}

TEST_CASE("regulation settles with critical damping and bounded overshoot") {
  const SerialArm arm = make_serial7();
  SimulationConfig cfg;
  cfg.gains = default_gains(false);  // fixed desired inertia, exactly critical damping
  cfg.q0 = (VecX(7) << 0.3, -0.4, 0.5, -1.2, 0.4, 1.0, 0.2).finished();
  cfg.dt = 1e-3;

  const RigidTransform start = arm.forward_kinematics(cfg.q0);
  // 5 cm and 20 degrees away
  Vec6 offset;
  offset << 0.03, 0.03, 0.02, 0.0, 0.35, 0.0;
  const RigidTransform target = start * se3::exp(offset);
  const std::vector<RigidTransform> refs = {target};

  const auto trace = simulate_closed_loop(arm, cfg, refs, nullptr, 2500);
  REQUIRE(!trace.truncated);

  const Vec3 target_pos = target.translation();
  const double initial_err = (start.translation() - target_pos).norm();
  double final_err = (trace.ee.back().position - target_pos).norm();
  CHECK(final_err < 0.02 * initial_err);

  // overshoot: projection along the start->target direction must not exceed 5%
  const Vec3 dir = (target_pos - start.translation()).normalized();
  double max_over = 0;
  for (const auto& p : trace.ee) {
    max_over = std::max(max_over, (p.position - target_pos).dot(dir));
  }
  CHECK(max_over < 0.05 * initial_err);

  // passivity-style storage decreases during regulation
  double prev = std::numeric_limits<double>::max();
  for (size_t k = 0; k < trace.ee.size(); k += 100) {
    ControlState st;
    st.x_e = RigidTransform::from_pose(trace.ee[k]);
    st.x_d = target;
    st.twist = trace.twist[k];
    const auto err = tracking_error(st);
    const Vec6 log_e = se3::log(err.error_transform);
    const double storage = 0.5 * err.error_twist.dot(err.error_twist) +
                           0.5 * log_e.dot(cfg.gains.stiffness.m() * log_e);
    CHECK(storage <= prev + 1e-8);
    prev = storage;
  }
}

TEST_CASE("smooth reference is tracked within 2 mm") {
  const SerialArm arm = make_serial7();
  SimulationConfig cfg;
  cfg.gains = default_gains(true);
  cfg.q0 = (VecX(7) << 0.3, -0.4, 0.5, -1.2, 0.4, 1.0, 0.2).finished();
  cfg.dt = 1e-3;
  cfg.ref_dt = 2e-3;

  const RigidTransform start = arm.forward_kinematics(cfg.q0);
  Vec6 offset;
  offset << 0.12, -0.1, 0.08, 0.0, 0.3, 0.2;
  const auto refs = geodesic_reference(start, start * se3::exp(offset), 1000);  // 2 s motion

  const auto trace = simulate_closed_loop(arm, cfg, refs, nullptr, 2200);
  REQUIRE(!trace.truncated);
  double max_err = 0;
  for (size_t k = 0; k < trace.t.size(); ++k) {
    const double t = trace.t[k];
    const int i = std::min<int>(static_cast<int>(t / cfg.ref_dt), refs.size() - 1);
    max_err = std::max(max_err, (trace.ee[k].position - refs[i].translation()).norm());
  }
  CHECK(max_err < 2e-3);
}

TEST_CASE("selective integral action cancels an unmeasured constant disturbance") {
  const SerialArm arm = make_serial7();
  SimulationConfig cfg;
  cfg.gains = default_gains(false);
  cfg.gains.integral_gain = VecX::Zero(6);
  cfg.gains.integral_gain[2] = 300.0;  // z only
  cfg.q0 = (VecX(7) << 0.3, -0.4, 0.5, -1.2, 0.4, 1.0, 0.2).finished();
  cfg.dt = 1e-3;
  cfg.measure_external_wrench = false;  // disturbance is not measured

  const RigidTransform start = arm.forward_kinematics(cfg.q0);
  const std::vector<RigidTransform> refs = {start};
  Vec6 disturbance = Vec6::Zero();
  disturbance[2] = -6.0;  // constant push along body z

  const auto trace =
      simulate_closed_loop(arm, cfg, refs, [&](double) { return disturbance; }, 9000);
  REQUIRE(!trace.truncated);

  // body-frame z error must vanish; x,y settle to their no-integral offsets
  ControlState st;
  st.x_e = RigidTransform::from_pose(trace.ee.back());
  st.x_d = start;
  const Vec6 log_e = se3::log(tracking_error(st).error_transform);
  CHECK(std::abs(log_e[2]) < 1e-4);

  // with no integral action the z error stays visibly larger
  SimulationConfig cfg2 = cfg;
  cfg2.gains.integral_gain.setZero();
  const auto trace2 =
      simulate_closed_loop(arm, cfg2, refs, [&](double) { return disturbance; }, 9000);
  ControlState st2;
  st2.x_e = RigidTransform::from_pose(trace2.ee.back());
  st2.x_d = start;
  const Vec6 log_e2 = se3::log(tracking_error(st2).error_transform);
  CHECK(std::abs(log_e2[2]) > 10 * std::abs(log_e[2]));

  // x and y behavior unchanged by the z-only integrator
  CHECK(std::abs(log_e[0] - log_e2[0]) < 5e-4);
  CHECK(std::abs(log_e[1] - log_e2[1]) < 5e-4);
}

TEST_CASE("joint limit violation truncates the trace with a status") {
  const SerialArm arm = make_planar3();
  SimulationConfig cfg;
  cfg.gains = default_gains(false);
  cfg.q0 = (VecX(3) << 0.4, 0.5, 0.3).finished();
  cfg.dt = 1e-3;
  const RigidTransform start = arm.forward_kinematics(cfg.q0);
  // unreachable target far outside the workspace drives the arm into limits
  const RigidTransform target(start.rotation(), start.translation() + Vec3(5.0, 5.0, 0));
  const auto trace = simulate_closed_loop(arm, cfg, {target}, nullptr, 4000);
  CHECK(trace.truncated);
  CHECK(trace.status.find("joint limit") != std::string::npos);
}
