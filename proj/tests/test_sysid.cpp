#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "skillforge/sysid.hpp"

using namespace skf;

namespace {

BarycentricParams planar3_params() {
  BarycentricParams p;
  const double lengths[3] = {0.4, 0.35, 0.25};
  const double masses[3] = {2.2, 1.6, 0.9};
  for (int i = 0; i < 3; ++i) {
    LinkParams l;
    l.mass = masses[i];
    l.com = Vec3(0.45 * lengths[i], 0.02, 0);
    const double izz = masses[i] * lengths[i] * lengths[i] / 10.0;
    l.inertia_com = Vec3(0.15 * izz, 0.92 * izz, izz).asDiagonal();
    p.links.push_back(l);
    p.friction.push_back(JointFriction{0.4 + 0.1 * i, 0.3 + 0.05 * i, 0.25 + 0.05 * i});
  }
  return p;
}

JointLimits planar3_limits() {
  JointLimits lim;
  lim.q_lo = VecX::Constant(3, -2.4);
  lim.q_hi = VecX::Constant(3, 2.4);
  lim.qd_max = VecX::Constant(3, 3.0);
  lim.qdd_max = VecX::Constant(3, 12.0);
  lim.qddd_max = VecX::Constant(3, 80.0);
  return lim;
}

std::vector<IdSample> samples_from_trajectory(const PlanarRegressor& reg,
                                              const HarmonicTrajectory& traj,
                                              const BarycentricParams& truth, int count,
                                              double noise_frac, Rng* rng) {
  const VecX psi = reg.pack(truth);
  std::vector<IdSample> data;
  VecX q, qd, qdd, qddd;
  for (int k = 0; k < count; ++k) {
    const double t = traj.period() * k / count;
    traj.eval(t, q, qd, qdd, qddd);
    IdSample s;
    s.q = q;
    s.qd = qd;
    s.qdd = qdd;
    s.tau = reg.full(q, qd, qdd) * psi;
    data.push_back(s);
  }
  if (noise_frac > 0 && rng) {
    VecX rms = VecX::Zero(reg.dof());
    for (const auto& s : data) rms += s.tau.cwiseAbs2();
    rms = (rms / static_cast<double>(data.size())).cwiseSqrt();
    for (auto& s : data) {
      for (int i = 0; i < s.tau.size(); ++i) s.tau[i] += noise_frac * rms[i] * rng->normal();
    }
  }
  return data;
}

}  // namespace

TEST_CASE("one-link pendulum exposes exactly three inertial base parameters") {
  PlanarRegressor reg({0.5});
  // mass column is unidentifiable, (h_x, h_y, I_o) survive, friction adds 3
  CHECK(reg.base_params() == 6);
  int inertial = 0;
  for (int c : reg.base_columns()) {
    if (c < 4) ++inertial;
    CHECK(c != 0);  // the raw mass never appears
  }
  CHECK(inertial == 3);

  // symbolic oracle: tau = I_o qdd - g (h_x cos q - h_y sin q) + friction
  Rng rng(71);
  const double g0 = 9.81;
  for (int i = 0; i < 50; ++i) {
    VecX q(1), qd(1), qdd(1);
    q[0] = rng.uniform(-3, 3);
    qd[0] = rng.uniform(-2, 2);
    qdd[0] = rng.uniform(-5, 5);
    BarycentricParams p;
    LinkParams l;
    l.mass = 1.7;
    l.com = Vec3(0.21, -0.04, 0);
    l.inertia_com = Vec3(0.01, 0.01, 0.03).asDiagonal();
    p.links = {l};
    p.friction = {JointFriction{0.5, 0.4, 0.2}};
    const double izz_o = 0.03 + 1.7 * (0.21 * 0.21 + 0.04 * 0.04);
    const double hx = 1.7 * 0.21, hy = 1.7 * -0.04;
    const double s = std::tanh(qd[0] / kFrictionSmoothing);
    const double expected = izz_o * qdd[0] + g0 * (hx * std::cos(q[0]) - hy * std::sin(q[0])) +
                            0.5 * 0.5 * (s + s * s) + 0.4 * 0.5 * (s - s * s) + 0.2 * qd[0];
    const double got = (reg.full(q, qd, qdd) * reg.pack(p))(0);
    CHECK(got == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("regressor torques match the independent spatial RNEA") {
  const SerialArm arm = make_planar3();
  PlanarRegressor reg({0.4, 0.35, 0.25});
  BarycentricParams p = planar3_params();
  for (auto& f : p.friction) f = JointFriction{};  // the arm model is frictionless
  const VecX psi = reg.pack(p);
  Rng rng(72);
  for (int i = 0; i < 100; ++i) {
    VecX q(3), qd(3), qdd(3);
    for (int j = 0; j < 3; ++j) {
      q[j] = rng.uniform(-2, 2);
      qd[j] = rng.uniform(-2, 2);
      qdd[j] = rng.uniform(-4, 4);
    }
    const VecX tau_reg = reg.full(q, qd, qdd) * psi;
    const VecX tau_rnea = arm.rnea(q, qd, qdd);
    CHECK((tau_reg - tau_rnea).norm() < 1e-9 * std::max(1.0, tau_rnea.norm()));
  }
}

TEST_CASE("torque is linear in the parameters") {
  PlanarRegressor reg({0.4, 0.35, 0.25});
  BarycentricParams p = planar3_params();
  BarycentricParams doubled = p;
  doubled.links[1].mass *= 2;  // doubles (m, h, I_o) of link 1 jointly
  doubled.links[1].inertia_com *= 2;
  Rng rng(73);
  VecX q(3), qd(3), qdd(3);
  for (int j = 0; j < 3; ++j) {
    q[j] = rng.normal();
    qd[j] = rng.normal();
    qdd[j] = rng.normal();
  }
  const MatX phi = reg.full(q, qd, qdd);
  const VecX psi_a = reg.pack(p);
  VecX psi_b = reg.pack(doubled);
  // contribution of link 1's inertial columns doubled, everything else fixed
  VecX diff = phi * (psi_b - psi_a);
  VecX direct = phi.block(0, 4, 3, 4) * psi_a.segment(4, 4);
  CHECK((diff - direct).norm() < 1e-12);
}

TEST_CASE("noiseless estimation recovers the base parameters to 1e-6") {
  PlanarRegressor reg({0.4, 0.35, 0.25});
  const BarycentricParams truth = planar3_params();
  HarmonicTrajectory traj = design_excitation(reg, planar3_limits(), 2 * M_PI * 0.1, 4, 99);
  const auto data = samples_from_trajectory(reg, traj, truth, 120, 0.0, nullptr);

  BarycentricParams prior = truth;
  prior.links[0].mass *= 1.15;  // prior off, base space must still lock on
  prior.links[1].com.x() *= 0.9;
  prior.friction[2].viscous *= 1.3;
  const auto res = estimate_params(reg, data, prior);
  const VecX base_true = reg.to_base(reg.pack(truth));
  CHECK((res.base_estimate - base_true).norm() / base_true.norm() < 1e-6);
  CHECK(physically_feasible(res.params));
  CHECK(res.residual < 1e-8);
}

TEST_CASE("one percent torque noise keeps the median error within two percent") {
  PlanarRegressor reg({0.4, 0.35, 0.25});
  const BarycentricParams truth = planar3_params();
  const VecX base_true = reg.to_base(reg.pack(truth));
  HarmonicTrajectory traj = design_excitation(reg, planar3_limits(), 2 * M_PI * 0.1, 4, 99);

  std::vector<double> errors;
  for (int trial = 0; trial < 15; ++trial) {
    Rng rng(1000 + trial);
    const auto data = samples_from_trajectory(reg, traj, truth, 400, 0.01, &rng);
    const auto res = estimate_params(reg, data, truth);
    errors.push_back((res.base_estimate - base_true).norm() / base_true.norm());
    CHECK(physically_feasible(res.params));
  }
  std::sort(errors.begin(), errors.end());
  CHECK(errors[errors.size() / 2] < 0.02);
}

TEST_CASE("excitation design: feasible, beats random, monotone in harmonics") {
  PlanarRegressor reg({0.4, 0.35, 0.25});
  const JointLimits lim = planar3_limits();
  const double wb = 2 * M_PI * 0.1;
  ExcitationOptions fast;
  fast.starts = 4;
  fast.iters = 25;
  const auto traj = design_excitation(reg, lim, wb, 3, 7, fast);
  CHECK(excitation_feasible(traj, lim, 64));

  // random feasible baselines never beat the optimized design
  const double val = excitation_logdet(reg, traj, fast.samples);
  Rng rng(74);
  for (int i = 0; i < 5; ++i) {
    HarmonicTrajectory rnd;
    rnd.theta0 = 0.5 * (lim.q_lo + lim.q_hi);
    rnd.a = MatX::Zero(3, 3);
    rnd.b = MatX::Zero(3, 3);
    rnd.omega_b = wb;
    rnd.n_h = 3;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        rnd.a(r, c) = 0.25 * rng.normal();
        rnd.b(r, c) = 0.25 * rng.normal();
      }
    }
    while (!excitation_feasible(rnd, lim, fast.samples)) {
      rnd.a *= 0.7;
      rnd.b *= 0.7;
    }
    CHECK(excitation_logdet(reg, rnd, fast.samples) <= val + 1e-9);
  }

  // one more harmonic with the padded optimum as a warm start cannot lose
  HarmonicTrajectory padded = traj;
  padded.n_h = 4;
  padded.a = MatX::Zero(3, 4);
  padded.b = MatX::Zero(3, 4);
  padded.a.leftCols(3) = traj.a;
  padded.b.leftCols(3) = traj.b;
  ExcitationOptions warm = fast;
  warm.warm_starts = {padded};
  const auto traj4 = design_excitation(reg, lim, wb, 4, 7, warm);
  CHECK(excitation_logdet(reg, traj4, fast.samples) >=
        excitation_logdet(reg, padded, fast.samples) - 1e-9);
}

TEST_CASE("adversarially infeasible data still yields feasible parameters") {
  PlanarRegressor reg({0.4, 0.35, 0.25});
  BarycentricParams bad = planar3_params();
  bad.links[2].inertia_com(2, 2) = -0.004;  // unphysical generator
  HarmonicTrajectory traj = design_excitation(reg, planar3_limits(), 2 * M_PI * 0.1, 3, 21);
  const auto data = samples_from_trajectory(reg, traj, bad, 120, 0.0, nullptr);
  const auto res = estimate_params(reg, data, planar3_params());
  CHECK(physically_feasible(res.params));

  // bounded residual increase: the feasible fit cannot be wildly off
  double rms_tau = 0;
  for (const auto& s : data) rms_tau += s.tau.squaredNorm();
  rms_tau = std::sqrt(rms_tau / (data.size() * 3.0));
  CHECK(res.residual < 0.05 * std::max(1.0, rms_tau));
}

TEST_CASE("ill-conditioned data raises the condition warning") {
  PlanarRegressor reg({0.4, 0.35, 0.25});
  const BarycentricParams truth = planar3_params();
  // all samples at rest in one pose: gravity terms only
  std::vector<IdSample> data;
  for (int i = 0; i < 100; ++i) {
    IdSample s;
    s.q = VecX::Constant(3, 0.3);
    s.qd = VecX::Zero(3);
    s.qdd = VecX::Zero(3);
    s.tau = reg.full(s.q, s.qd, s.qdd) * reg.pack(truth);
    data.push_back(s);
  }
  const auto res = estimate_params(reg, data, truth);
  CHECK(res.condition_warning);
}
