#include "skillforge/sysid.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

namespace skf {

namespace {

inline Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }
inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Forward kinematic sweep of the planar chain.
struct PlanarPass {
  std::vector<double> phi, omega, alpha;  // absolute angle and derivatives
  std::vector<Vec2> origin, a_origin, xhat;
};

PlanarPass planar_forward(const std::vector<double>& lengths, const VecX& q, const VecX& qd,
                          const VecX& qdd) {
  const int n = static_cast<int>(lengths.size());
  PlanarPass p;
  p.phi.resize(n);
  p.omega.resize(n);
  p.alpha.resize(n);
  p.origin.resize(n);
  p.a_origin.resize(n);
  p.xhat.resize(n);
  double phi = 0, omega = 0, alpha = 0;
  Vec2 org = Vec2::Zero(), a_org = Vec2::Zero();
  for (int i = 0; i < n; ++i) {
    phi += q[i];
    omega += qd[i];
    alpha += qdd[i];
    p.phi[i] = phi;
    p.omega[i] = omega;
    p.alpha[i] = alpha;
    p.origin[i] = org;
    p.a_origin[i] = a_org;
    p.xhat[i] = Vec2(std::cos(phi), std::sin(phi));
    const Vec2 r = lengths[i] * p.xhat[i];
    a_org = a_org + alpha * perp(r) - omega * omega * r;
    org = org + r;
  }
  return p;
}

}  // namespace

VecX friction_torque(const std::vector<JointFriction>& fr, const VecX& qd) {
  VecX tau = VecX::Zero(qd.size());
  for (int i = 0; i < qd.size(); ++i) {
    const double s = std::tanh(qd[i] / kFrictionSmoothing);
    tau[i] = fr[i].coulomb_pos * 0.5 * (s + s * s) + fr[i].coulomb_neg * 0.5 * (s - s * s) +
             fr[i].viscous * qd[i];
  }
  return tau;
}

PlanarRegressor::PlanarRegressor(std::vector<double> link_lengths, double gravity)
    : lengths_(std::move(link_lengths)), gravity_(gravity) {
  require(!lengths_.empty(), "regressor needs at least one link");
  analyze_base();
}

MatX PlanarRegressor::full(const VecX& q, const VecX& qd, const VecX& qdd) const {
  const int n = dof();
  const PlanarPass fp = planar_forward(lengths_, q, qd, qdd);
  const Vec2 g(0, gravity_);
  MatX phi = MatX::Zero(n, full_params());

  // Inertial columns: backward Newton-Euler with a unit parameter at a time.
  // Force and moment contributions of link j appear in joints i <= j.
  for (int j = 0; j < n; ++j) {
    // unit parameters: (m, hx, hy, Izz_origin) of link j
    for (int p = 0; p < 4; ++p) {
      Vec2 f_link = Vec2::Zero();
      double n_link = 0;
      const double w = fp.omega[j], al = fp.alpha[j];
      const Vec2 a = fp.a_origin[j];
      if (p == 0) {  // mass
        f_link = a - g;
      } else if (p == 1 || p == 2) {  // first moment, link frame
        const Vec2 h_local = (p == 1) ? Vec2(1, 0) : Vec2(0, 1);
        const double c = std::cos(fp.phi[j]), s = std::sin(fp.phi[j]);
        const Vec2 h_w(c * h_local.x() - s * h_local.y(), s * h_local.x() + c * h_local.y());
        f_link = al * perp(h_w) - w * w * h_w;
        n_link = cross2(h_w, a - g);
      } else {  // inertia about the link origin
        n_link = al;
      }
      // propagate to every joint at or below j
      const int col = 4 * j + p;
      double n_carry = n_link;
      for (int i = j; i >= 0; --i) {
        if (i < j) n_carry += cross2(fp.origin[i + 1] - fp.origin[i], f_link);
        phi(i, col) = n_carry;
        // moment about the next joint down keeps the same force resultant
      }
    }
  }
  // Friction columns.
  for (int i = 0; i < n; ++i) {
    const double s = std::tanh(qd[i] / kFrictionSmoothing);
    phi(i, 4 * n + 3 * i + 0) = 0.5 * (s + s * s);
    phi(i, 4 * n + 3 * i + 1) = 0.5 * (s - s * s);
    phi(i, 4 * n + 3 * i + 2) = qd[i];
  }
  return phi;
}

MatX PlanarRegressor::base(const VecX& q, const VecX& qd, const VecX& qdd) const {
  const MatX phi = full(q, qd, qdd);
  MatX out(dof(), base_params());
  for (int c = 0; c < base_params(); ++c) out.col(c) = phi.col(base_cols_[c]);
  return out;
}

void PlanarRegressor::analyze_base() {
  // Numerical rank analysis on stacked random-state regressors.
  Rng rng(0x5eed);
  const int n = dof();
  const int p = full_params();
  const int samples = 12 * p;
  MatX stack(samples * n, p);
  for (int s = 0; s < samples; ++s) {
    VecX q(n), qd(n), qdd(n);
    for (int i = 0; i < n; ++i) {
      q[i] = rng.uniform(-2.5, 2.5);
      qd[i] = rng.uniform(-2.0, 2.0);
      qdd[i] = rng.uniform(-4.0, 4.0);
    }
    stack.block(s * n, 0, n, p) = full(q, qd, qdd);
  }
  Eigen::ColPivHouseholderQR<MatX> qr(stack);
  qr.setThreshold(1e-9);
  const int rank = static_cast<int>(qr.rank());
  require(rank >= 1, "regressor stack has zero rank");
  const auto perm = qr.colsPermutation().indices();
  base_cols_.assign(perm.data(), perm.data() + rank);
  std::sort(base_cols_.begin(), base_cols_.end());

  // fold matrix: tau = Phi[:, ind] (psi_ind + T psi_dep) with T from LS.
  std::vector<int> dep;
  for (int c = 0; c < p; ++c) {
    if (std::find(base_cols_.begin(), base_cols_.end(), c) == base_cols_.end()) dep.push_back(c);
  }
  MatX w_ind(stack.rows(), rank), w_dep(stack.rows(), static_cast<int>(dep.size()));
  for (int c = 0; c < rank; ++c) w_ind.col(c) = stack.col(base_cols_[c]);
  for (size_t c = 0; c < dep.size(); ++c) w_dep.col(static_cast<int>(c)) = stack.col(dep[c]);
  const MatX t = w_ind.colPivHouseholderQr().solve(w_dep);

  fold_ = MatX::Zero(rank, p);
  for (int c = 0; c < rank; ++c) fold_(c, base_cols_[c]) = 1.0;
  for (size_t c = 0; c < dep.size(); ++c) fold_.col(dep[c]) = t.col(static_cast<int>(c));
}

VecX PlanarRegressor::pack(const BarycentricParams& p) const {
  const int n = dof();
  require(static_cast<int>(p.links.size()) == n && static_cast<int>(p.friction.size()) == n,
          "parameter count mismatch");
  VecX psi(full_params());
  for (int i = 0; i < n; ++i) {
    const auto& l = p.links[i];
    const double izz_origin =
        l.inertia_com(2, 2) + l.mass * (l.com.x() * l.com.x() + l.com.y() * l.com.y());
    psi[4 * i + 0] = l.mass;
    psi[4 * i + 1] = l.mass * l.com.x();
    psi[4 * i + 2] = l.mass * l.com.y();
    psi[4 * i + 3] = izz_origin;
    psi[4 * n + 3 * i + 0] = p.friction[i].coulomb_pos;
    psi[4 * n + 3 * i + 1] = p.friction[i].coulomb_neg;
    psi[4 * n + 3 * i + 2] = p.friction[i].viscous;
  }
  return psi;
}

BarycentricParams PlanarRegressor::unpack(const VecX& psi, const BarycentricParams& prior) const {
  const int n = dof();
  BarycentricParams out = prior;
  for (int i = 0; i < n; ++i) {
    auto& l = out.links[i];
    l.mass = psi[4 * i + 0];
    const double m = std::max(l.mass, 1e-9);
    l.com.x() = psi[4 * i + 1] / m;
    l.com.y() = psi[4 * i + 2] / m;
    const double izz_com =
        psi[4 * i + 3] - l.mass * (l.com.x() * l.com.x() + l.com.y() * l.com.y());
    // Only the z inertia is identifiable from planar motion; the off-plane
    // entries keep the prior's shape, scaled with the identified Izz so the
    // eigenvalue triangle inequality carries over from a feasible prior.
    const double prior_izz = std::max(prior.links[i].inertia_com(2, 2), 1e-9);
    l.inertia_com = prior.links[i].inertia_com * (std::max(izz_com, 1e-9) / prior_izz);
    l.inertia_com(2, 2) = izz_com;
    out.friction[i].coulomb_pos = psi[4 * n + 3 * i + 0];
    out.friction[i].coulomb_neg = psi[4 * n + 3 * i + 1];
    out.friction[i].viscous = psi[4 * n + 3 * i + 2];
  }
  return out;
}

VecX PlanarRegressor::to_base(const VecX& psi_full) const { return fold_ * psi_full; }

VecX PlanarRegressor::from_base(const VecX& psi_hat, const VecX& psi_prior) const {
  const MatX et = fold_.transpose();
  const MatX gram = fold_ * et;
  return psi_prior + et * gram.ldlt().solve(psi_hat - fold_ * psi_prior);
}

bool physically_feasible(const BarycentricParams& p, double mass_floor) {
  for (const auto& l : p.links) {
    if (!(l.mass >= mass_floor)) return false;
    Eigen::SelfAdjointEigenSolver<Mat3> es(l.inertia_com);
    const Vec3 ev = es.eigenvalues();
    if (!(ev.minCoeff() > 0)) return false;
    if (ev[2] > ev[0] + ev[1] + 1e-12) return false;  // triangle inequality
  }
  return true;
}

BarycentricParams project_feasible(const BarycentricParams& p, double mass_floor) {
  BarycentricParams out = p;
  for (auto& l : out.links) {
    l.mass = std::max(l.mass, mass_floor);
    Mat3 sym = 0.5 * (l.inertia_com + l.inertia_com.transpose());
    Eigen::SelfAdjointEigenSolver<Mat3> es(sym);
    Vec3 ev = es.eigenvalues().cwiseMax(1e-8);
    // project onto the triangle inequality half-space lambda_max <= sum others
    std::array<int, 3> idx = {0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return ev[a] < ev[b]; });
    const double viol = ev[idx[2]] - ev[idx[0]] - ev[idx[1]];
    if (viol > 0) {
      ev[idx[2]] -= viol / 3.0;
      ev[idx[0]] += viol / 3.0;
      ev[idx[1]] += viol / 3.0;
    }
    l.inertia_com = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  }
  return out;
}

void HarmonicTrajectory::eval(double t, VecX& q, VecX& qd, VecX& qdd, VecX& qddd) const {
  const int n = static_cast<int>(theta0.size());
  q = theta0;
  qd = VecX::Zero(n);
  qdd = VecX::Zero(n);
  qddd = VecX::Zero(n);
  for (int l = 1; l <= n_h; ++l) {
    const double w = l * omega_b;
    const double sw = std::sin(w * t), cw = std::cos(w * t);
    for (int i = 0; i < n; ++i) {
      const double al = a(i, l - 1), bl = b(i, l - 1);
      q[i] += al * sw + bl * cw;
      qd[i] += w * (al * cw - bl * sw);
      qdd[i] += -w * w * (al * sw + bl * cw);
      qddd[i] += -w * w * w * (al * cw - bl * sw);
    }
  }
}

double excitation_logdet(const PlanarRegressor& reg, const HarmonicTrajectory& traj,
                         int samples) {
  const int r = reg.base_params();
  MatX info = MatX::Zero(r, r);
  VecX q, qd, qdd, qddd;
  for (int k = 0; k < samples; ++k) {
    const double t = traj.period() * k / samples;
    traj.eval(t, q, qd, qdd, qddd);
    const MatX phi = reg.base(q, qd, qdd);
    info += phi.transpose() * phi;
  }
  Eigen::LLT<MatX> llt(info);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  return 2.0 * MatX(llt.matrixL()).diagonal().array().log().sum();
}

bool excitation_feasible(const HarmonicTrajectory& traj, const JointLimits& limits, int samples) {
  VecX q, qd, qdd, qddd;
  for (int k = 0; k < samples; ++k) {
    const double t = traj.period() * k / samples;
    traj.eval(t, q, qd, qdd, qddd);
    for (int i = 0; i < q.size(); ++i) {
      if (q[i] < limits.q_lo[i] || q[i] > limits.q_hi[i]) return false;
      if (std::abs(qd[i]) > limits.qd_max[i]) return false;
      if (std::abs(qdd[i]) > limits.qdd_max[i]) return false;
      if (std::abs(qddd[i]) > limits.qddd_max[i]) return false;
    }
  }
  return true;
}

namespace {

double constraint_penalty(const HarmonicTrajectory& traj, const JointLimits& limits,
                          int samples) {
  double pen = 0;
  VecX q, qd, qdd, qddd;
  for (int k = 0; k < samples; ++k) {
    const double t = traj.period() * k / samples;
    traj.eval(t, q, qd, qdd, qddd);
    for (int i = 0; i < q.size(); ++i) {
      auto hinge = [&pen](double v) {
        if (v > 0) pen += v * v;
      };
      hinge(limits.q_lo[i] - q[i]);
      hinge(q[i] - limits.q_hi[i]);
      hinge(std::abs(qd[i]) - limits.qd_max[i]);
      hinge(std::abs(qdd[i]) - limits.qdd_max[i]);
      hinge(std::abs(qddd[i]) - limits.qddd_max[i]);
    }
  }
  return pen;
}

HarmonicTrajectory unflatten(const VecX& x, int n, int n_h, double omega_b) {
  HarmonicTrajectory tr;
  tr.theta0 = x.head(n);
  tr.a = Eigen::Map<const MatX>(x.data() + n, n, n_h);
  tr.b = Eigen::Map<const MatX>(x.data() + n + n * n_h, n, n_h);
  tr.omega_b = omega_b;
  tr.n_h = n_h;
  return tr;
}

VecX flatten(const HarmonicTrajectory& tr) {
  const int n = static_cast<int>(tr.theta0.size());
  VecX x(n * (2 * tr.n_h + 1));
  x.head(n) = tr.theta0;
  Eigen::Map<MatX>(x.data() + n, n, tr.n_h) = tr.a;
  Eigen::Map<MatX>(x.data() + n + n * tr.n_h, n, tr.n_h) = tr.b;
  return x;
}

}  // namespace

HarmonicTrajectory design_excitation(const PlanarRegressor& reg, const JointLimits& limits,
                                     double omega_b, int n_h, std::uint64_t seed,
                                     const ExcitationOptions& opts) {
  const int n = reg.dof();
  for (int i = 0; i < n; ++i) {
    require(limits.q_lo[i] < limits.q_hi[i], "inconsistent position limits");
    require(limits.qd_max[i] > 0 && limits.qdd_max[i] > 0 && limits.qddd_max[i] > 0,
            "inconsistent rate limits");
  }
  Rng rng(seed);
  const VecX mid = 0.5 * (limits.q_lo + limits.q_hi);

  auto feasible_start = [&](Rng& r) {
    HarmonicTrajectory tr;
    tr.theta0 = mid;
    tr.a = MatX::Zero(n, n_h);
    tr.b = MatX::Zero(n, n_h);
    tr.omega_b = omega_b;
    tr.n_h = n_h;
    for (int i = 0; i < n; ++i) {
      for (int l = 0; l < n_h; ++l) {
        tr.a(i, l) = 0.3 * r.normal();
        tr.b(i, l) = 0.3 * r.normal();
      }
    }
    for (int it = 0; it < 40 && !excitation_feasible(tr, limits, 4 * opts.samples); ++it) {
      tr.a *= 0.7;
      tr.b *= 0.7;
    }
    return tr;
  };

  auto objective = [&](const HarmonicTrajectory& tr) {
    return excitation_logdet(reg, tr, opts.samples) -
           1e4 * constraint_penalty(tr, limits, opts.samples);
  };

  HarmonicTrajectory best;
  double best_val = -std::numeric_limits<double>::infinity();
  bool have_feasible = false;
  const int total_starts = opts.starts + static_cast<int>(opts.warm_starts.size());
  for (int s = 0; s < total_starts; ++s) {
    Rng sub = rng.fork(s);
    HarmonicTrajectory tr = s < static_cast<int>(opts.warm_starts.size())
                                ? opts.warm_starts[s]
                                : feasible_start(sub);
    if (!excitation_feasible(tr, limits, opts.samples)) continue;
    VecX x = flatten(tr);
    double val = objective(tr);
    double step = 0.05;
    for (int it = 0; it < opts.iters; ++it) {
      // forward-difference gradient
      VecX grad(x.size());
      for (int j = 0; j < x.size(); ++j) {
        VecX xp = x;
        xp[j] += opts.fd_step;
        grad[j] = (objective(unflatten(xp, n, n_h, omega_b)) - val) / opts.fd_step;
      }
      const double gn = grad.norm();
      if (gn < 1e-9) break;
      bool improved = false;
      for (int ls = 0; ls < 12; ++ls) {
        const VecX xn = x + step * grad / gn;
        const double vn = objective(unflatten(xn, n, n_h, omega_b));
        if (vn > val) {
          x = xn;
          val = vn;
          improved = true;
          step = std::min(step * 1.5, 0.5);
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    HarmonicTrajectory cand = unflatten(x, n, n_h, omega_b);
    // retreat toward the feasible start until a finer grid passes the limits
    const int fine = 4 * opts.samples;
    if (!excitation_feasible(cand, limits, fine)) {
      const VecX x0 = flatten(tr);
      const VecX x1 = flatten(cand);
      for (double frac = 0.95; frac > 0; frac -= 0.05) {
        HarmonicTrajectory blend = unflatten(x0 + frac * (x1 - x0), n, n_h, omega_b);
        if (excitation_feasible(blend, limits, fine)) {
          cand = blend;
          break;
        }
      }
      if (!excitation_feasible(cand, limits, fine)) cand = tr;
    }
    const double cand_val = excitation_logdet(reg, cand, opts.samples);
    if (!have_feasible || cand_val > best_val) {
      best = cand;
      best_val = cand_val;
      have_feasible = true;
    }
  }
  if (!have_feasible) {
    throw NumericalError("excitation design found no feasible start within the budget");
  }
  return best;
}

namespace {

// Exact Euclidean projection of one link's (m, hx, hy, Io) block onto the
// convex planar-realizability set {m >= floor, Io - |h|^2/m >= eps}. KKT
// stationarity gives h = h0 / (1 + 2 lambda / m), Io = Io0 + lambda,
// m = m0 + lambda |h|^2 / m^2; the multiplier is found by bisection.
void project_link_block(double* blk, double mass_floor, double eps_inertia) {
  double m0 = std::max(blk[0], mass_floor);
  const Vec2 h0(blk[1], blk[2]);
  const double io0 = blk[3];
  auto violation = [&](double m, const Vec2& h, double io) {
    return h.squaredNorm() / m - (io - eps_inertia);
  };
  if (violation(m0, h0, io0) <= 0) {
    blk[0] = m0;
    return;
  }
  auto eval = [&](double lambda, double& m, Vec2& h, double& io) {
    m = m0;
    for (int it = 0; it < 60; ++it) {
      h = h0 / (1.0 + 2.0 * lambda / m);
      const double m_next = std::max(mass_floor, m0 + lambda * h.squaredNorm() / (m * m));
      if (std::abs(m_next - m) < 1e-14) {
        m = m_next;
        break;
      }
      m = m_next;
    }
    io = io0 + lambda;
    return violation(m, h, io);
  };
  double lo = 0, hi = 1.0;
  double m, io;
  Vec2 h;
  while (eval(hi, m, h, io) > 0 && hi < 1e12) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (eval(mid, m, h, io) > 0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  eval(hi, m, h, io);
  blk[0] = m;
  blk[1] = h.x();
  blk[2] = h.y();
  blk[3] = io;
}

}  // namespace

EstimateResult estimate_params(const PlanarRegressor& reg, const std::vector<IdSample>& data,
                               const BarycentricParams& prior, const EstimateOptions& opts) {
  const int n = reg.dof();
  const int r = reg.base_params();
  require(static_cast<int>(data.size()) * n >= 3 * r,
          "need at least three samples per base parameter");

  MatX big(static_cast<int>(data.size()) * n, r);
  VecX rhs(big.rows());
  for (size_t s = 0; s < data.size(); ++s) {
    big.block(static_cast<int>(s) * n, 0, n, r) = reg.base(data[s].q, data[s].qd, data[s].qdd);
    rhs.segment(static_cast<int>(s) * n, n) = data[s].tau;
  }
  Eigen::BDCSVD<MatX> svd(big, Eigen::ComputeThinU | Eigen::ComputeThinV);
  EstimateResult out;
  out.condition = svd.singularValues().maxCoeff() / svd.singularValues().minCoeff();
  out.condition_warning = out.condition > opts.condition_warn;
  const VecX base_ls = svd.solve(rhs);

  // alternating projections between the base-consistent affine set and the
  // convex planar-feasible cone; both projections are exact, so the iterates
  // converge into the intersection whenever it is non-empty.
  auto project_cone = [&](VecX psi) {
    for (int i = 0; i < n; ++i) {
      project_link_block(psi.data() + 4 * i, opts.mass_floor, 1e-6);
    }
    return psi;
  };
  const VecX psi_prior = reg.pack(prior);
  VecX psi = reg.from_base(base_ls, psi_prior);
  VecX psi_feas = project_cone(psi);
  for (int it = 0; it < opts.feasibility_iters; ++it) {
    if ((psi - psi_feas).norm() < 1e-11) break;
    psi = reg.from_base(base_ls, psi_feas);
    psi_feas = project_cone(psi);
  }
  BarycentricParams final_params = reg.unpack(psi_feas, prior);
  out.params = final_params;
  out.base_estimate = reg.to_base(reg.pack(final_params));

  double ss = 0;
  for (const auto& s : data) {
    const VecX pred = reg.base(s.q, s.qd, s.qdd) * out.base_estimate;
    ss += (pred - s.tau).squaredNorm();
  }
  out.residual = std::sqrt(ss / static_cast<double>(data.size() * n));
  return out;
}

}  // namespace skf
