#include "skillforge/impedance.hpp"

#include <Eigen/SVD>

namespace skf {

TrackingError tracking_error(const ControlState& state) {
  TrackingError out;
  out.error_transform = state.x_e.inverse() * state.x_d;
  out.error_twist = state.twist - se3::adjoint(out.error_transform) * state.twist_d;
  return out;
}

Vec6 error_rate(const TrackingError& err, const Vec6& cdot, const Vec6& twist_d,
                const Vec6& accel_d) {
  const Mat6 ad_e = se3::adjoint(err.error_transform);
  const Vec6 zeta = -(se3::adjoint(err.error_transform.inverse()) * err.error_twist);
  return cdot - ad_e * accel_d - ad_e * se3::ad(zeta) * twist_d;
}

MatX effective_damping(const ImpedanceGains& gains, const MatX& m_d) {
  if (!(gains.operational_space_inertia && gains.critical_damping_from_inertia)) {
    return gains.damping.m();
  }
  const SpdMatrix md(MatX(0.5 * (m_d + m_d.transpose())));
  const MatX ms = md.sqrt();
  const MatX mis = md.inv_sqrt();
  const MatX k_tilde = mis * gains.stiffness.m() * mis;
  return ms * 2.0 * SpdMatrix(MatX(0.5 * (k_tilde + k_tilde.transpose()))).sqrt() * ms;
}

Vec6 desired_error_dynamics(const TrackingError& err, const Vec6& f_ext, const MatX& m_d,
                            const ImpedanceGains& gains, const Vec6& f_ff,
                            const Vec6& integral_term) {
  const Vec6 log_e = se3::log(err.error_transform);
  const Vec6 spring = gains.stiffness.m() * log_e + integral_term;
  const Vec6 damper = effective_damping(gains, m_d) * err.error_twist;
  const Vec6 ff = se3::adjoint(err.error_transform.inverse()).transpose() * f_ff;
  return m_d.ldlt().solve(f_ext + spring - damper - ff);
}

Vec6 control_input(const Vec6& z, const TrackingError& err, const Vec6& twist_d,
                   const Vec6& accel_d) {
  const Vec6 zeta = -(se3::adjoint(err.error_transform.inverse()) * err.error_twist);
  return z + se3::adjoint(err.error_transform) * (accel_d + se3::ad(zeta) * twist_d);
}

MatX operational_space_inertia(const SerialArm& model, const VecX& q) {
  const MatX j = model.body_jacobian(q);
  const MatX h = model.inertia(q);
  const MatX hi_jt = h.ldlt().solve(j.transpose());
  MatX lambda_inv = j * hi_jt;
  lambda_inv = 0.5 * (lambda_inv + lambda_inv.transpose());
  return lambda_inv.ldlt().solve(MatX::Identity(6, 6));
}

TorqueResult computed_torque(const Vec6& u, const SerialArm& model, const VecX& q,
                             const VecX& qd, const Vec6& f_ext, const ImpedanceGains& gains,
                             const TorqueOptions& opts) {
  const int n = model.dof();
  const MatX j = model.body_jacobian(q);
  const MatX jdot = model.body_jacobian_dot(q, qd);
  const MatX h = model.inertia(q);
  const VecX nl = model.nonlinear(q, qd);

  TorqueResult out;
  Eigen::JacobiSVD<MatX> svd(j);
  const double sigma_min = svd.singularValues().minCoeff();
  double lambda = opts.damping_base;
  if (sigma_min < opts.singular_threshold) {
    const double ratio = 1.0 - sigma_min / opts.singular_threshold;
    lambda += 1e-4 * ratio * ratio;
    out.near_singular = true;
  }

  MatX j_pinv;
  if (gains.operational_space_inertia) {
    // dynamically consistent inverse: H^-1 J^T (J H^-1 J^T + lambda I)^-1
    const MatX hi_jt = h.ldlt().solve(j.transpose());
    MatX core = j * hi_jt + lambda * MatX::Identity(6, 6);
    j_pinv = hi_jt * core.ldlt().solve(MatX::Identity(6, 6));
    MatX lam_inv = j * h.ldlt().solve(j.transpose());
    lam_inv = 0.5 * (lam_inv + lam_inv.transpose());
    out.m_d = lam_inv.ldlt().solve(MatX::Identity(6, 6));
  } else {
    MatX core = j * j.transpose() + lambda * MatX::Identity(6, 6);
    j_pinv = j.transpose() * core.ldlt().solve(MatX::Identity(6, 6));
    out.m_d = gains.desired_inertia.m();
  }

  VecX qdd_ns = VecX::Zero(n);
  if (opts.nullspace_reference.size() == n) {
    const VecX attract =
        opts.nullspace_kp * (opts.nullspace_reference - q) - opts.nullspace_kd * qd;
    qdd_ns = (MatX::Identity(n, n) - j_pinv * j) * attract;
  }

  const VecX qdd_task = j_pinv * (u - jdot * qd);
  out.torque = h * (qdd_task + qdd_ns) + nl - j.transpose() * f_ext;
  return out;
}

namespace {

// Zero-order-hold geodesic interpolation of the reference with body-twist
// finite differences.
struct ReferenceSampler {
  const std::vector<RigidTransform>& refs;
  double ref_dt;

  RigidTransform pose(double t) const {
    const int n = static_cast<int>(refs.size());
    const double s = t / ref_dt;
    const int i = std::min(static_cast<int>(s), n - 1);
    if (i >= n - 1) return refs.back();
    const double frac = s - i;
    const Vec6 step = se3::log(refs[i].inverse() * refs[i + 1]);
    return refs[i] * se3::exp(frac * step);
  }

  Vec6 twist(double t) const {
    const int n = static_cast<int>(refs.size());
    const int i = std::min(static_cast<int>(t / ref_dt), n - 1);
    if (i >= n - 1) return Vec6::Zero();
    return se3::log(refs[i].inverse() * refs[i + 1]) / ref_dt;
  }

  Vec6 accel(double t) const {
    const Vec6 a = twist(t + ref_dt);
    const Vec6 b = twist(t);
    return (a - b) / ref_dt;
  }
};

}  // namespace

SimTrace simulate_closed_loop(const SerialArm& model, const SimulationConfig& config,
                              const std::vector<RigidTransform>& reference,
                              const std::function<Vec6(double)>& wrench_schedule, int steps) {
  require(!reference.empty(), "empty reference trajectory");
  require(config.dt > 0 && config.dt <= 1e-3 + 1e-12,
          "simulation timestep must be positive and at most 1e-3 s");
  const int n = model.dof();
  require(config.q0.size() == n, "q0 size mismatch");

  ReferenceSampler sampler{reference, config.ref_dt};
  VecX q = config.q0;
  VecX qd = VecX::Zero(n);
  Vec6 integral = Vec6::Zero();

  // Redundant arms need the nullspace attractor; default it to the start
  // configuration so self-motion stays damped.
  TorqueOptions topts = config.torque;
  if (topts.nullspace_reference.size() != n) topts.nullspace_reference = config.q0;

  SimTrace trace;
  for (int k = 0; k < steps; ++k) {
    const double t = k * config.dt;
    const RigidTransform x_e = model.forward_kinematics(q);
    const MatX j = model.body_jacobian(q);
    const Vec6 c = j * qd;
    const Vec6 f_ext = wrench_schedule ? wrench_schedule(t) : Vec6::Zero();
    const Vec6 f_measured = config.measure_external_wrench ? f_ext : Vec6::Zero();

    ControlState state;
    state.x_e = x_e;
    state.x_d = sampler.pose(t);
    state.twist = c;
    state.twist_d = sampler.twist(t);
    state.accel_d = sampler.accel(t);
    state.f_ext = f_measured;
    state.f_ff = config.f_ff;

    const TrackingError err = tracking_error(state);
    const Vec6 log_e = se3::log(err.error_transform);
    integral += config.dt * log_e;
    for (int i = 0; i < 6; ++i) {
      integral[i] = std::clamp(integral[i], -config.gains.integral_clamp,
                               config.gains.integral_clamp);
    }
    const Vec6 integral_term = config.gains.integral_gain.asDiagonal() * integral;

    MatX m_d;
    if (config.gains.operational_space_inertia) {
      m_d = operational_space_inertia(model, q);
    } else {
      m_d = config.gains.desired_inertia.m();
    }
    const Vec6 z =
        desired_error_dynamics(err, f_measured, m_d, config.gains, config.f_ff, integral_term);
    const Vec6 u = control_input(z, err, state.twist_d, state.accel_d);
    const TorqueResult tr = computed_torque(u, model, q, qd, f_measured, config.gains, topts);

    trace.t.push_back(t);
    trace.ee.push_back(x_e.to_pose());
    trace.twist.push_back(c);
    trace.wrench.push_back(f_ext);
    trace.torque.push_back(tr.torque);
    trace.q.push_back(q);

    // plant: H qdd + N = tau + J^T f_ext, semi-implicit Euler
    const MatX h = model.inertia(q);
    const VecX nl = model.nonlinear(q, qd);
    const VecX qdd = h.ldlt().solve(tr.torque + j.transpose() * f_ext - nl);
    qd += config.dt * qdd;
    q += config.dt * qd;
    if (!model.within_limits(q)) {
      trace.truncated = true;
      trace.status = "joint limit violated at t=" + std::to_string(t);
      break;
    }
  }
  return trace;
}

}  // namespace skf
