#pragma once

#include <functional>
#include <optional>

#include "skillforge/arm.hpp"

namespace skf {

// Cartesian impedance gains. With `operational_space_inertia` the desired
// inertia is (J H^-1 J^T)^-1, which removes the external wrench from the
// torque law at the price of configuration-dependent behavior.
struct ImpedanceGains {
  SpdMatrix stiffness = SpdMatrix::identity(6);
  SpdMatrix damping = SpdMatrix::identity(6);
  bool operational_space_inertia = true;
  // Under a configuration-dependent inertia a fixed damping matrix is either
  // over- or under-damped somewhere along the motion; this derives critical
  // damping from the current M_d instead: B = M^1/2 2 (M^-1/2 K M^-1/2)^1/2 M^1/2.
  bool critical_damping_from_inertia = true;
  SpdMatrix desired_inertia = SpdMatrix::identity(6);
  VecX integral_gain = VecX::Zero(6);
  double integral_clamp = 5.0;  // per-axis bound on the accumulated error
};

// Damping matrix actually applied given the desired inertia in effect.
MatX effective_damping(const ImpedanceGains& gains, const MatX& m_d);

// Snapshot of everything the control law consumes at one instant.
struct ControlState {
  RigidTransform x_e, x_d;
  Vec6 twist = Vec6::Zero();     // c, body twist of the end-effector
  Vec6 twist_d = Vec6::Zero();   // c_d
  Vec6 accel_d = Vec6::Zero();   // cdot_d
  Vec6 f_ext = Vec6::Zero();     // external wrench in the EE frame
  Vec6 f_ff = Vec6::Zero();      // feedforward wrench
};

struct TrackingError {
  RigidTransform error_transform;  // E = X_e^-1 X_d
  Vec6 error_twist;                // e = c - Ad_E c_d
};

TrackingError tracking_error(const ControlState& state);

// Time derivative of the error twist along the true dynamics, for numerical
// checks: edot = cdot - Ad_E cdot_d - Ad_E ad_(E^-1 Edot) c_d, where the body
// twist of the error path is E^-1 Edot = -Ad_{E^-1} e.
Vec6 error_rate(const TrackingError& err, const Vec6& cdot, const Vec6& twist_d,
                const Vec6& accel_d);

// Desired error dynamics Z = M_d^-1 (f_ext + K Log(E) - B e - Ad_{E^-1}^T f_ff).
Vec6 desired_error_dynamics(const TrackingError& err, const Vec6& f_ext, const MatX& m_d,
                            const ImpedanceGains& gains, const Vec6& f_ff,
                            const Vec6& integral_term = Vec6::Zero());

// Control input u = Z + Ad_E (cdot_d + ad_(E^-1 Edot) c_d); substituting into
// the error dynamics gives edot = Z.
Vec6 control_input(const Vec6& z, const TrackingError& err, const Vec6& twist_d,
                   const Vec6& accel_d);

struct TorqueResult {
  VecX torque;
  MatX m_d;             // desired inertia actually used
  bool near_singular = false;
};

struct TorqueOptions {
  double damping_base = 1e-10;
  double singular_threshold = 1e-3;  // on the smallest singular value of J
  VecX nullspace_reference;          // empty disables the nullspace attractor
  double nullspace_kp = 4.0;
  double nullspace_kd = 2.0;
};

// Computed-torque law tau = H (J# (u - Jdot qd) + qdd_ns) + N - J^T f_ext.
// J# is the dynamically consistent pseudoinverse when tracking operational-
// space inertia, a damped least-squares inverse otherwise.
TorqueResult computed_torque(const Vec6& u, const SerialArm& model, const VecX& q,
                             const VecX& qd, const Vec6& f_ext, const ImpedanceGains& gains,
                             const TorqueOptions& opts = {});

// Operational-space inertia (J H^-1 J^T)^-1 at a configuration.
MatX operational_space_inertia(const SerialArm& model, const VecX& q);

struct SimulationConfig {
  ImpedanceGains gains;
  TorqueOptions torque;
  VecX q0;
  double dt = 1e-3;
  double ref_dt = 1e-3;  // spacing of the reference samples
  Vec6 f_ff = Vec6::Zero();
  // When false the controller runs blind to the schedule (the wrench still
  // acts on the plant), modelling an unmeasured disturbance.
  bool measure_external_wrench = true;
};

struct SimTrace {
  std::vector<double> t;
  std::vector<Pose> ee;
  std::vector<Vec6> twist;
  std::vector<Vec6> wrench;
  std::vector<VecX> torque;
  std::vector<VecX> q;
  bool truncated = false;
  std::string status = "ok";
};

// Closed-loop simulation of the torque-controlled arm tracking a reference
// pose sequence under an external wrench schedule (body frame, function of
// time). Semi-implicit Euler; truncates on joint-limit violation.
SimTrace simulate_closed_loop(const SerialArm& model, const SimulationConfig& config,
                              const std::vector<RigidTransform>& reference,
                              const std::function<Vec6(double)>& wrench_schedule, int steps);

}  // namespace skf
