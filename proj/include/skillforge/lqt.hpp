#pragma once

#include <vector>

#include "skillforge/gaussian.hpp"

namespace skf {

// Finite-horizon linear-quadratic tracking on a manifold. References are
// Gaussians per step (mean pose + precision); dynamics are a tangent-space
// double integrator x_{t+1} = A x_t + B u_t with
// A = [[I, I dt], [0, I]], B = [[0], [I dt]].
template <class M>
struct LqtProblemT {
  struct Reference {
    typename M::Point mean;
    MatX precision;  // PSD, zero rows allowed (untracked step)
  };
  std::vector<Reference> references;  // length T >= 2
  MatX control_cost;                  // SPD, d x d
  double dt = 0.05;
  typename M::Point start;
  VecX start_velocity;  // tangent at start; zero when empty

  void validate() const {
    require(references.size() >= 2, "LQT needs at least two reference steps");
    require(dt > 0, "LQT timestep must be positive");
    SpdMatrix r_check(control_cost);  // throws unless SPD
    (void)r_check;
  }
};

template <class M>
struct PoseTrajectoryT {
  struct Step {
    typename M::Point pose;
    VecX velocity;  // tangent at pose
    VecX control;   // tangent at pose
  };
  std::vector<Step> steps;
};

using LqtProblem = LqtProblemT<PoseManifold>;
using PoseTrajectory = PoseTrajectoryT<PoseManifold>;

// Receding-horizon Riemannian LQT: at every step the remaining problem is
// re-linearized in the tangent space of the current state (references via
// log, precisions via parallel transport), the Euclidean backward pass is
// solved exactly, the first control applied, and the velocity parallel-
// transported to the next state. On flat manifolds this reproduces the
// global discrete LQT solution exactly, because the Riccati recursion is
// time-consistent.
template <class M>
PoseTrajectoryT<M> solve_lqt(const LqtProblemT<M>& problem) {
  problem.validate();
  const int horizon = static_cast<int>(problem.references.size());
  const int d = M::kDim;
  const double dt = problem.dt;

  MatX a = MatX::Identity(2 * d, 2 * d);
  a.block(0, d, d, d) = dt * MatX::Identity(d, d);
  MatX b = MatX::Zero(2 * d, d);
  b.block(d, 0, d, d) = dt * MatX::Identity(d, d);

  PoseTrajectoryT<M> out;
  typename M::Point state = problem.start;
  VecX velocity = problem.start_velocity.size() == d ? problem.start_velocity : VecX::Zero(d);

  for (int t = 0; t < horizon; ++t) {
    if (t == horizon - 1) {
      out.steps.push_back({state, velocity, VecX::Zero(d)});
      break;
    }
    // Remaining references in the tangent space at the current state.
    const int rem = horizon - t;
    std::vector<VecX> targets(rem);
    std::vector<MatX> precisions(rem);
    for (int i = 0; i < rem; ++i) {
      const auto& ref = problem.references[t + i];
      targets[i] = M::log(state, ref.mean);
      const MatX tr = M::transport(ref.mean, state);
      MatX q = tr * ref.precision * tr.transpose();
      q = 0.5 * (q + q.transpose());
      // numerical guard: clamp tiny negative eigenvalues from the transport
      Eigen::SelfAdjointEigenSolver<MatX> es(q);
      if (es.eigenvalues().minCoeff() < 0) {
        q = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
            es.eigenvectors().transpose();
      }
      precisions[i] = q;
    }

    // Euclidean backward pass over the remaining horizon.
    MatX s = MatX::Zero(d, 2 * d);
    s.block(0, 0, d, d) = MatX::Identity(d, d);
    MatX pmat = s.transpose() * precisions[rem - 1] * s;
    VecX qvec = s.transpose() * precisions[rem - 1] * targets[rem - 1];
    MatX first_gain;
    VecX first_ff;
    for (int i = rem - 2; i >= 0; --i) {
      const MatX inv = (problem.control_cost + b.transpose() * pmat * b)
                           .ldlt()
                           .solve(MatX::Identity(d, d));
      const MatX gain = inv * b.transpose() * pmat * a;
      const VecX ff = inv * b.transpose() * qvec;
      if (i == 0) {
        first_gain = gain;
        first_ff = ff;
      }
      pmat = s.transpose() * precisions[i] * s + a.transpose() * pmat * (a - b * gain);
      pmat = 0.5 * (pmat + pmat.transpose());
      qvec = s.transpose() * precisions[i] * targets[i] + (a - b * gain).transpose() * qvec;
    }

    VecX z(2 * d);
    z << VecX::Zero(d), velocity;
    const VecX u = -first_gain * z + first_ff;
    out.steps.push_back({state, velocity, u});

    const VecX z_next = a * z + b * u;
    const typename M::Point next = M::exp(state, z_next.head(d));
    velocity = M::transport(state, next) * z_next.tail(d);
    state = next;
  }
  return out;
}

// Realized tracking cost of a trajectory against the problem's references.
template <class M>
double lqt_cost(const LqtProblemT<M>& problem, const PoseTrajectoryT<M>& traj) {
  double cost = 0;
  for (size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& ref = problem.references[t];
    const VecX e = M::log(traj.steps[t].pose, ref.mean);
    const MatX tr = M::transport(ref.mean, traj.steps[t].pose);
    cost += e.dot(tr * ref.precision * tr.transpose() * e);
    cost += traj.steps[t].control.dot(problem.control_cost * traj.steps[t].control);
  }
  return cost;
}

// SE(3) view of a pose trajectory for the tracking controller.
std::vector<RigidTransform> to_se3_trajectory(const PoseTrajectory& traj);

inline std::vector<RigidTransform> to_se3_trajectory(const std::vector<Pose>& poses) {
  std::vector<RigidTransform> out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back(RigidTransform::from_pose(p));
  return out;
}

}  // namespace skf
