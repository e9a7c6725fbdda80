#pragma once

#include <vector>

#include "skillforge/hsmm.hpp"

namespace skf {

// One step of a force-based kinesthetic demonstration. Velocity/acceleration
// use the pose tangent convention [linear world, angular body]; the wrench
// pairs forces with the linear block and torques with the angular block.
struct ForceDemoStep {
  Pose pose;
  Vec6 velocity = Vec6::Zero();
  Vec6 acceleration = Vec6::Zero();
  Vec6 wrench = Vec6::Zero();
};

using ForceDemo = std::vector<ForceDemoStep>;

// Per-component optimal stiffness plus the shared damping rule.
struct StiffnessProfile {
  std::vector<SpdMatrix> stiffness;  // 6x6 per HSMM component
  SpdMatrix damping;                 // the K_nu used throughout

  void validate() const {
    for (const auto& k : stiffness) {
      require(k.rows() == 6, "stiffness must be 6x6");
      require(k.min_eigenvalue() >= 1e-6 - 1e-12, "stiffness below SPD floor");
    }
  }
};

// Default translational/rotational stiffness of the underlying impedance
// controller, and its critical damping companion.
SpdMatrix default_stiffness(double translational = 500.0, double rotational = 50.0);
SpdMatrix critical_damping(const SpdMatrix& stiffness);

// Virtual mass-spring-damper attractor: y_t = Exp_{x_t}(K^-rho (K^nu xd + xdd - f)).
std::vector<Pose> compute_attractor(const ForceDemo& demo, const SpdMatrix& k_rho,
                                    const SpdMatrix& k_nu);

// Inverse of compute_attractor given per-step component assignments:
// f_t = K^nu xd + xdd - K_k Log_{x_t}(y_t).
std::vector<Vec6> reconstruct_wrench(const ForceDemo& demo, const std::vector<Pose>& attractor,
                                     const StiffnessProfile& profile,
                                     const std::vector<int>& assignment);

struct StiffnessOptions {
  double mass_floor = 1e-3;  // minimum responsibility mass per component
  double eig_floor = 1e-6;
  int max_iter = 4000;
  double tol = 1e-10;
};

// Optimal per-component stiffness: for component k the per-demo residual is
//   eps_m = sum_t p_tk (Log_{mu_k}(x_t) - K^-rho (K^nu xd_t + xdd_t - f_t)),
// linear in W = K^-rho; we minimize sum_m |eps_m|^2 over SPD W by projected
// gradient and report K = W^-1. Convex in W under fixed responsibilities.
StiffnessProfile optimize_stiffness(const std::vector<ForceDemo>& demos,
                                    const std::vector<FrameSet>& demo_frames,
                                    const TpHsmm& attractor_model, const MatX& responsibilities,
                                    const TpData<PoseManifold>& attractor_data,
                                    const SpdMatrix& k_nu, const StiffnessOptions& opts = {});

}  // namespace skf
