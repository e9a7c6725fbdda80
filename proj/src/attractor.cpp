#include "skillforge/attractor.hpp"

namespace skf {

SpdMatrix default_stiffness(double translational, double rotational) {
  VecX d(6);
  d << translational, translational, translational, rotational, rotational, rotational;
  return SpdMatrix::diagonal(d);
}

SpdMatrix critical_damping(const SpdMatrix& stiffness) {
  return SpdMatrix(MatX(2.0 * stiffness.sqrt()));
}

std::vector<Pose> compute_attractor(const ForceDemo& demo, const SpdMatrix& k_rho,
                                    const SpdMatrix& k_nu) {
  const MatX k_inv = k_rho.inverse();
  std::vector<Pose> out;
  out.reserve(demo.size());
  for (const auto& step : demo) {
    const Vec6 offset = k_inv * (k_nu.m() * step.velocity + step.acceleration - step.wrench);
    if (offset.tail<3>().norm() >= M_PI - kCutLocusTol) {
      throw ValidationError(
          "attractor offset beyond the orientation injectivity radius; "
          "force/stiffness scales are inconsistent");
    }
    out.push_back(r3s3::exp(step.pose, offset));
  }
  return out;
}

std::vector<Vec6> reconstruct_wrench(const ForceDemo& demo, const std::vector<Pose>& attractor,
                                     const StiffnessProfile& profile,
                                     const std::vector<int>& assignment) {
  require(demo.size() == attractor.size() && demo.size() == assignment.size(),
          "reconstruct_wrench: length mismatch");
  std::vector<Vec6> out;
  out.reserve(demo.size());
  for (size_t t = 0; t < demo.size(); ++t) {
    const auto& k = profile.stiffness[assignment[t]];
    const Vec6 offset = r3s3::log(demo[t].pose, attractor[t]);
    out.push_back(profile.damping.m() * demo[t].velocity + demo[t].acceleration -
                  k.m() * offset);
  }
  return out;
}

namespace {

// min over symmetric PD W of sum_m |s_m - W g_m|^2, projected gradient with
// an SPD eigenvalue floor.
MatX solve_spd_least_squares(const std::vector<Vec6>& s, const std::vector<Vec6>& g,
                             const StiffnessOptions& opts) {
  // Lipschitz constant of the gradient: 2 * sum |g|^2.
  double lip = 0;
  for (const auto& v : g) lip += v.squaredNorm();
  lip = std::max(lip * 2.0, 1e-12);
  const double step = 1.0 / lip;

  // start from the symmetrized unconstrained normal-equation solution
  MatX gram = MatX::Zero(6, 6);
  MatX cross = MatX::Zero(6, 6);
  for (size_t m = 0; m < g.size(); ++m) {
    gram += g[m] * g[m].transpose();
    cross += s[m] * g[m].transpose();
  }
  gram.diagonal().array() += 1e-12;
  MatX w = SpdMatrix::project(cross * gram.inverse(), opts.eig_floor).m();

  for (int it = 0; it < opts.max_iter; ++it) {
    MatX grad = MatX::Zero(6, 6);
    for (size_t m = 0; m < g.size(); ++m) {
      grad += 2.0 * (w * g[m] - s[m]) * g[m].transpose();
    }
    grad = 0.5 * (grad + grad.transpose());
    const MatX next = SpdMatrix::project(w - step * grad, opts.eig_floor).m();
    const double delta = (next - w).norm();
    w = next;
    if (delta < opts.tol) break;
  }
  return w;
}

}  // namespace

StiffnessProfile optimize_stiffness(const std::vector<ForceDemo>& demos,
                                    const std::vector<FrameSet>& demo_frames,
                                    const TpHsmm& attractor_model, const MatX& responsibilities,
                                    const TpData<PoseManifold>& attractor_data,
                                    const SpdMatrix& k_nu, const StiffnessOptions& opts) {
  const int k = attractor_model.num_states();
  const int m = static_cast<int>(demos.size());
  require(static_cast<int>(demo_frames.size()) == m, "frame set per demo required");
  require(attractor_data.num_demos() == m, "attractor data demo count mismatch");

  // Global component means under each demo's own task parameters.
  std::vector<std::vector<Pose>> mu(m, std::vector<Pose>(k));
  for (int d = 0; d < m; ++d) {
    FrameSet frames;
    for (const auto& id : attractor_model.gmm.frame_ids) {
      frames.push_back(find_frame(demo_frames[d], id));
    }
    for (int c = 0; c < k; ++c) {
      mu[d][c] = attractor_model.gmm.global_component(c, frames).mean;
    }
  }

  // sample index bookkeeping: attractor_data rows align with responsibilities
  StiffnessProfile profile;
  profile.damping = k_nu;
  for (int c = 0; c < k; ++c) {
    std::vector<Vec6> s_terms, g_terms;
    double mass = 0;
    for (int d = 0; d < m; ++d) {
      Vec6 s_acc = Vec6::Zero(), g_acc = Vec6::Zero();
      int row = 0;
      for (int i = 0; i < attractor_data.num_samples(); ++i) {
        if (attractor_data.demo_id[i] != d) continue;
        row = attractor_data.step[i];
        const double p = responsibilities(i, c);
        if (p < 1e-12) continue;
        const auto& stp = demos[d][row];
        s_acc += p * r3s3::log(mu[d][c], stp.pose);
        g_acc += p * (k_nu.m() * stp.velocity + stp.acceleration - stp.wrench);
        mass += p;
      }
      s_terms.push_back(s_acc);
      g_terms.push_back(g_acc);
    }
    if (mass < opts.mass_floor) {
      throw NumericalError("optimize_stiffness: component " + std::to_string(c) +
                           " has insufficient responsibility mass");
    }
    const MatX w = solve_spd_least_squares(s_terms, g_terms, opts);
    const MatX k_mat = SpdMatrix(w).inverse();
    profile.stiffness.push_back(SpdMatrix::project(k_mat, opts.eig_floor));
  }
  profile.validate();
  return profile;
}

}  // namespace skf
