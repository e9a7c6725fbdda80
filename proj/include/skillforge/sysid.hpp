#pragma once

#include <vector>

#include "skillforge/arm.hpp"
#include "skillforge/rng.hpp"

namespace skf {

// Asymmetric Coulomb plus viscous friction, three parameters per joint.
// The sign is smoothed by tanh(qd / eps) to keep the regressor differentiable.
struct JointFriction {
  double coulomb_pos = 0;
  double coulomb_neg = 0;
  double viscous = 0;
};

constexpr double kFrictionSmoothing = 1e-3;  // rad/s

// Full dynamics parameter set of a planar chain: per link the barycentric
// inertial parameters, per joint the friction triple.
struct BarycentricParams {
  std::vector<LinkParams> links;
  std::vector<JointFriction> friction;
};

// Physical feasibility: positive masses, SPD COM inertia tensors, triangle
// inequality on their eigenvalues.
bool physically_feasible(const BarycentricParams& p, double mass_floor = 1e-6);
BarycentricParams project_feasible(const BarycentricParams& p, double mass_floor = 1e-3);

// Torque regressor of a planar serial chain (z axes, links along x, gravity
// in -y): tau = Phi(q, qd, qdd) Psi, linear in
// [m, m cx, m cy, Izz_about_origin] per link and the friction triples.
class PlanarRegressor {
 public:
  PlanarRegressor(std::vector<double> link_lengths, double gravity = -9.81);

  int dof() const { return static_cast<int>(lengths_.size()); }
  int inertial_params() const { return 4 * dof(); }
  int full_params() const { return 7 * dof(); }
  int base_params() const { return static_cast<int>(base_cols_.size()); }
  const std::vector<int>& base_columns() const { return base_cols_; }

  MatX full(const VecX& q, const VecX& qd, const VecX& qdd) const;
  MatX base(const VecX& q, const VecX& qd, const VecX& qdd) const;

  // psi vector layout of a physical parameter set.
  VecX pack(const BarycentricParams& p) const;
  BarycentricParams unpack(const VecX& psi, const BarycentricParams& prior) const;

  // base-space extraction: psi_hat = E psi (selection plus dependency fold).
  VecX to_base(const VecX& psi_full) const;
  // minimum-norm full update consistent with a base estimate, around a prior.
  VecX from_base(const VecX& psi_hat, const VecX& psi_prior) const;

 private:
  void analyze_base();
  std::vector<double> lengths_;
  double gravity_;
  std::vector<int> base_cols_;
  MatX fold_;  // E: base_params x full_params
};

struct HarmonicTrajectory {
  VecX theta0;
  MatX a, b;  // dof x n_h
  double omega_b = 0.2 * 2 * M_PI;
  int n_h = 4;

  double period() const { return 2 * M_PI / omega_b; }
  void eval(double t, VecX& q, VecX& qd, VecX& qdd, VecX& qddd) const;
};

struct JointLimits {
  VecX q_lo, q_hi, qd_max, qdd_max, qddd_max;
};

struct ExcitationOptions {
  int samples = 32;  // constraint/objective samples over one period
  int starts = 8;
  int iters = 60;
  double fd_step = 1e-5;
  std::vector<HarmonicTrajectory> warm_starts;  // extra multistart seeds
};

// D-optimal excitation design: maximize logdet(sum Phi_hat^T Phi_hat) over
// the harmonic coefficients subject to position/velocity/acceleration/jerk
// limits at the sampled instants. Penalized projected-gradient ascent with
// multistart; the returned trajectory satisfies every sampled constraint.
HarmonicTrajectory design_excitation(const PlanarRegressor& reg, const JointLimits& limits,
                                     double omega_b, int n_h, std::uint64_t seed,
                                     const ExcitationOptions& opts = {});

double excitation_logdet(const PlanarRegressor& reg, const HarmonicTrajectory& traj,
                         int samples);
bool excitation_feasible(const HarmonicTrajectory& traj, const JointLimits& limits, int samples);

struct IdSample {
  VecX q, qd, qdd, tau;
};

struct EstimateOptions {
  double condition_warn = 1e8;
  int feasibility_iters = 60;
  double mass_floor = 1e-3;
};

struct EstimateResult {
  BarycentricParams params;
  VecX base_estimate;
  double residual = 0;      // rms torque residual of the feasible solution
  double condition = 0;
  bool condition_warning = false;
};

// Least squares in base-parameter space followed by alternating projection
// between the base-consistent affine set and the physically feasible cone.
EstimateResult estimate_params(const PlanarRegressor& reg, const std::vector<IdSample>& data,
                               const BarycentricParams& prior, const EstimateOptions& opts = {});

// Friction torque used by data generators, matching the regressor columns.
VecX friction_torque(const std::vector<JointFriction>& fr, const VecX& qd);

}  // namespace skf
