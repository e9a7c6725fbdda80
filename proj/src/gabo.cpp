#include "skillforge/gabo.hpp"

namespace skf {

namespace {

int block_encoded_dim(const DomainFactor& f) {
  if (const auto* e = std::get_if<EuclideanFactor>(&f)) return static_cast<int>(e->lo.size());
  if (std::holds_alternative<QuaternionFactor>(f)) return 4;
  if (std::holds_alternative<Sphere2Factor>(f)) return 3;
  const auto& s = std::get<SpdFactor>(f);
  return spdman::tangent_dim(s.center.rows());
}

int tangent_dim_of(const DomainFactor& f) {
  if (const auto* e = std::get_if<EuclideanFactor>(&f)) return static_cast<int>(e->lo.size());
  if (std::holds_alternative<QuaternionFactor>(f)) return 3;
  if (std::holds_alternative<Sphere2Factor>(f)) return 2;
  const auto& s = std::get<SpdFactor>(f);
  return spdman::tangent_dim(s.center.rows());
}

// Move within a factor by a tangent step, then clamp back into the trust
// region toward its center.
VecX step_in_factor(const DomainFactor& f, const VecX& enc, const VecX& da) {
  if (const auto* e = std::get_if<EuclideanFactor>(&f)) {
    VecX out = enc + da;
    for (int i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], e->lo[i], e->hi[i]);
    return out;
  }
  if (const auto* qf = std::get_if<QuaternionFactor>(&f)) {
    UnitQuaternion q(enc[0], enc[1], enc[2], enc[3]);
    q = s3::exp(q, Vec3(da)).canonical();
    const double d = s3::distance(qf->center, q);
    if (d > qf->max_angle) {
      const Vec3 v = s3::log(qf->center, q);
      q = s3::exp(qf->center, v * (qf->max_angle / d)).canonical();
    }
    return q.coeffs_wxyz();
  }
  if (const auto* sf = std::get_if<Sphere2Factor>(&f)) {
    Vec3 x = Vec3(enc).normalized();
    x = s2::exp(x, Vec2(da));
    const double d = s2::distance(sf->center, x);
    if (d > sf->max_angle) {
      const Vec2 v = s2::log(sf->center, x);
      x = s2::exp(sf->center, Vec2(v * (sf->max_angle / d)));
    }
    return x;
  }
  const auto& sp = std::get<SpdFactor>(f);
  const VecX center = encode_spd(sp.center);
  VecX out = enc + da;
  const double d = (out - center).norm();
  if (d > sp.max_log_ratio) out = center + (out - center) * (sp.max_log_ratio / d);
  return out;
}

}  // namespace

VecX encode_spd(const SpdMatrix& s) { return spdman::vech(s.logm()); }

DomainPoint random_point(const SearchDomain& domain, Rng& rng) {
  DomainPoint p;
  for (const auto& f : domain.factors) {
    if (const auto* e = std::get_if<EuclideanFactor>(&f)) {
      VecX v(e->lo.size());
      for (int i = 0; i < v.size(); ++i) v[i] = rng.uniform(e->lo[i], e->hi[i]);
      p.blocks.push_back(v);
    } else if (const auto* qf = std::get_if<QuaternionFactor>(&f)) {
      Vec3 dir(rng.normal(), rng.normal(), rng.normal());
      if (dir.norm() < 1e-12) dir = Vec3::UnitX();
      dir.normalize();
      const double ang = qf->max_angle * std::cbrt(rng.uniform());
      p.blocks.push_back(s3::exp(qf->center, ang * dir).canonical().coeffs_wxyz());
    } else if (const auto* sf = std::get_if<Sphere2Factor>(&f)) {
      Vec3 dir(rng.normal(), rng.normal(), rng.normal());
      if (dir.norm() < 1e-12) dir = Vec3::UnitX();
      Vec3 e1, e2;
      s2::basis(sf->center, e1, e2);
      const double phi = rng.uniform(0, 2 * M_PI);
      const double ang = std::min(sf->max_angle, M_PI - 1e-6) * std::sqrt(rng.uniform());
      p.blocks.push_back(
          s2::exp(sf->center, ang * Vec2(std::cos(phi), std::sin(phi))));
    } else {
      const auto& sp = std::get<SpdFactor>(f);
      const int d = spdman::tangent_dim(sp.center.rows());
      VecX off(d);
      for (int i = 0; i < d; ++i) off[i] = rng.normal();
      off *= sp.max_log_ratio * rng.uniform() / std::max(off.norm(), 1e-12);
      p.blocks.push_back(encode_spd(sp.center) + off);
    }
  }
  return p;
}

bool point_in_domain(const SearchDomain& domain, const DomainPoint& p, double tol) {
  if (p.blocks.size() != domain.factors.size()) return false;
  for (size_t i = 0; i < domain.factors.size(); ++i) {
    const auto& f = domain.factors[i];
    const VecX& b = p.blocks[i];
    if (b.size() != block_encoded_dim(f)) return false;
    if (const auto* e = std::get_if<EuclideanFactor>(&f)) {
      for (int j = 0; j < b.size(); ++j) {
        if (b[j] < e->lo[j] - tol || b[j] > e->hi[j] + tol) return false;
      }
    } else if (const auto* qf = std::get_if<QuaternionFactor>(&f)) {
      if (std::abs(b.norm() - 1.0) > 1e-9) return false;
      if (s3::distance(qf->center, UnitQuaternion(b[0], b[1], b[2], b[3])) >
          qf->max_angle + tol) {
        return false;
      }
    } else if (const auto* sf = std::get_if<Sphere2Factor>(&f)) {
      if (std::abs(b.norm() - 1.0) > 1e-9) return false;
      if (s2::distance(sf->center, Vec3(b)) > sf->max_angle + tol) return false;
    } else {
      const auto& sp = std::get<SpdFactor>(f);
      if ((b - encode_spd(sp.center)).norm() > sp.max_log_ratio + tol) return false;
    }
  }
  return true;
}

double factor_distance2(const DomainFactor& f, const VecX& a, const VecX& b) {
  if (std::holds_alternative<QuaternionFactor>(f)) {
    // chordal distance with antipodal identification
    const double dot = std::min(1.0, std::abs(a.dot(b)));
    return 2.0 - 2.0 * dot;
  }
  return (a - b).squaredNorm();
}

UnitQuaternion quaternion_of(const DomainPoint& p, int block) {
  const VecX& b = p.blocks[block];
  return UnitQuaternion(b[0], b[1], b[2], b[3]);
}

SpdMatrix spd_of(const SearchDomain& domain, const DomainPoint& p, int block) {
  const auto& sp = std::get<SpdFactor>(domain.factors[block]);
  const int n = sp.center.rows();
  MatX log_mat = spdman::unvech(p.blocks[block], n);
  MatX s = sym_expm(log_mat);
  return SpdMatrix::project(s, sp.eig_floor);
}

DomainPoint make_point(const SearchDomain& domain, const std::vector<VecX>& blocks) {
  DomainPoint p;
  p.blocks = blocks;
  require(point_in_domain(domain, p, 1e-6), "point outside the search domain");
  return p;
}

double Surrogate::kernel(const DomainPoint& a, const DomainPoint& b) const {
  double expo = 0;
  for (size_t i = 0; i < domain_.factors.size(); ++i) {
    const double d2 = factor_distance2(domain_.factors[i], a.blocks[i], b.blocks[i]);
    const double l = lengthscales_[static_cast<int>(i)];
    expo += d2 / (2.0 * l * l);
  }
  return signal_var_ * std::exp(-expo);
}

Surrogate Surrogate::fit(const SearchDomain& domain, const std::vector<DomainPoint>& x,
                         const VecX& y, const GpConfig& config) {
  require(!x.empty(), "surrogate needs at least one observation");
  require(static_cast<int>(x.size()) == y.size(), "x/y size mismatch");
  Surrogate gp(domain);
  gp.x_ = x;
  gp.noise_var_ = config.noise_var;
  const int n = static_cast<int>(x.size());
  gp.mean_ = y.mean();
  gp.y_ = y.array() - gp.mean_;

  const int nf = static_cast<int>(domain.factors.size());
  // initial lengthscales: median pairwise distance per factor
  VecX ls(nf);
  for (int f = 0; f < nf; ++f) {
    std::vector<double> d;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        d.push_back(std::sqrt(factor_distance2(domain.factors[f], x[i].blocks[f], x[j].blocks[f])));
      }
    }
    if (d.empty()) {
      ls[f] = 1.0;
    } else {
      std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
      ls[f] = std::max(d[d.size() / 2], 1e-3);
    }
  }
  double sv = std::max(gp.y_.squaredNorm() / std::max(1, n - 1), 1e-8);
  if (!config.optimize_hyperparams) {
    if (config.fixed_lengthscales.size() == nf) ls = config.fixed_lengthscales;
    sv = config.fixed_signal_var;
  }

  auto build = [&](const VecX& ells, double var, Eigen::LLT<MatX>& llt, double* jitter_out) {
    gp.lengthscales_ = ells;
    gp.signal_var_ = var;
    MatX k(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) {
        k(i, j) = k(j, i) = gp.kernel(x[i], x[j]);
      }
    }
    double jitter = 0;
    for (;;) {
      MatX kj = k + (gp.noise_var_ + jitter) * MatX::Identity(n, n);
      llt.compute(kj);
      if (llt.info() == Eigen::Success) break;
      jitter = jitter == 0 ? 1e-10 : jitter * 10;
      if (jitter > config.max_jitter) {
        throw NumericalError("kernel config error: Gram matrix not PSD after max jitter");
      }
    }
    if (jitter_out) *jitter_out = jitter;
  };

  auto lml = [&](const VecX& ells, double var) {
    Eigen::LLT<MatX> llt;
    try {
      build(ells, var, llt, nullptr);
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
    const VecX alpha = llt.solve(gp.y_);
    const double logdet = 2.0 * MatX(llt.matrixL()).diagonal().array().log().sum();
    return -0.5 * gp.y_.dot(alpha) - 0.5 * logdet - 0.5 * n * std::log(2 * M_PI);
  };

  if (config.optimize_hyperparams && n >= 3) {
    // deterministic coordinate search on log-scaled hyperparameters
    const double factors[5] = {0.25, 0.5, 1.0, 2.0, 4.0};
    double best = lml(ls, sv);
    for (int round = 0; round < 3; ++round) {
      for (int f = 0; f < nf; ++f) {
        double best_l = ls[f];
        for (double m : factors) {
          VecX trial = ls;
          trial[f] = ls[f] * m;
          const double v = lml(trial, sv);
          if (v > best) {
            best = v;
            best_l = trial[f];
          }
        }
        ls[f] = best_l;
      }
      double best_sv = sv;
      for (double m : factors) {
        const double v = lml(ls, sv * m);
        if (v > best) {
          best = v;
          best_sv = sv * m;
        }
      }
      sv = best_sv;
    }
  }
  build(ls, sv, gp.llt_, nullptr);
  gp.alpha_ = gp.llt_.solve(gp.y_);
  return gp;
}

Surrogate::Posterior Surrogate::posterior(const DomainPoint& p) const {
  Posterior out;
  if (x_.empty()) {
    out.mean = mean_;
    out.variance = signal_var_;
    return out;
  }
  const int n = size();
  VecX kstar(n);
  for (int i = 0; i < n; ++i) kstar[i] = kernel(x_[i], p);
  out.mean = mean_ + kstar.dot(alpha_);
  out.variance = std::max(0.0, kernel(p, p) - kstar.dot(llt_.solve(kstar)));
  return out;
}

double Acquisition::operator()(const Surrogate& gp, const DomainPoint& p) const {
  const auto post = gp.posterior(p);
  const double s = std::sqrt(std::max(post.variance, 1e-16));
  const double z = (post.mean - incumbent - exploration) / s;
  const double phi = std::exp(-0.5 * z * z) / std::sqrt(2 * M_PI);
  const double cdf = 0.5 * std::erfc(-z / M_SQRT2);
  double ei = s * (z * cdf + phi);
  if (success_bias) ei *= std::max(0.0, success_bias(p));
  return ei;
}

DomainPoint suggest(const Surrogate& gp, const Acquisition& acq, std::uint64_t seed,
                    const SuggestOptions& opts) {
  const SearchDomain& domain = gp.domain();
  Rng rng(seed);
  if (gp.size() == 0) return random_point(domain, rng);

  DomainPoint best;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int start = 0; start < opts.multistarts; ++start) {
    DomainPoint p;
    if (start == 0) {
      // best observed point as one start
      int arg = 0;
      gp.targets().maxCoeff(&arg);
      p = gp.points()[arg];
    } else {
      p = random_point(domain, rng);
    }
    double val = acq(gp, p);
    double step = opts.step_size;
    for (int it = 0; it < opts.steps; ++it) {
      bool improved = false;
      for (size_t f = 0; f < domain.factors.size(); ++f) {
        const int td = tangent_dim_of(domain.factors[f]);
        // numeric gradient in the factor's tangent parameters
        VecX grad(td);
        const double h = 1e-5;
        for (int j = 0; j < td; ++j) {
          VecX dj = VecX::Zero(td);
          dj[j] = h;
          DomainPoint pp = p;
          pp.blocks[f] = step_in_factor(domain.factors[f], p.blocks[f], dj);
          grad[j] = (acq(gp, pp) - val) / h;
        }
        const double gn = grad.norm();
        if (gn < 1e-14) continue;
        DomainPoint trial = p;
        trial.blocks[f] = step_in_factor(domain.factors[f], p.blocks[f], step * grad / gn);
        const double tv = acq(gp, trial);
        if (tv > val) {
          p = trial;
          val = tv;
          improved = true;
        }
      }
      if (!improved) {
        step *= 0.5;
        if (step < 1e-5) break;
      }
    }
    if (val > best_val) {
      best_val = val;
      best = p;
    }
  }
  if (best.blocks.empty()) best = random_point(domain, rng);
  return best;
}

SuccessClassifier SuccessClassifier::fit(const SearchDomain& domain,
                                         const std::vector<DomainPoint>& x,
                                         const std::vector<int>& labels,
                                         const GpConfig& config) {
  require(x.size() == labels.size(), "label count mismatch");
  VecX y(static_cast<int>(labels.size()));
  for (size_t i = 0; i < labels.size(); ++i) y[static_cast<int>(i)] = labels[i] ? 0.5 : -0.5;
  SuccessClassifier cls;
  GpConfig cfg = config;
  cfg.noise_var = std::max(config.noise_var, 1e-3);
  cls.gp_ = Surrogate::fit(domain, x, y, cfg);
  return cls;
}

double SuccessClassifier::probability(const DomainPoint& p) const {
  const auto post = gp_.posterior(p);
  const double z = post.mean / std::sqrt(post.variance + 0.05);
  return 0.5 * std::erfc(-z / M_SQRT2);
}

BoResult bo_maximize(const SearchDomain& domain, const BoObjective& objective,
                     const std::vector<DomainPoint>& seed_points, int budget,
                     std::uint64_t seed, const BoOptions& opts) {
  BoResult result;
  std::vector<DomainPoint> xs;
  std::vector<double> ys;
  int iteration = 0;
  auto evaluate = [&](const DomainPoint& p) {
    const auto [value, success] = objective(p);
    xs.push_back(p);
    ys.push_back(value);
    if (value > result.best_value) {
      result.best_value = value;
      result.best = p;
    }
    result.trace.push_back(BoTraceRow{iteration++, p, value, success, result.best_value});
  };

  Rng rng(seed);
  for (const auto& p : seed_points) {
    if (iteration >= budget) break;
    evaluate(p);
  }
  while (iteration < budget) {
    VecX y = Eigen::Map<const VecX>(ys.data(), static_cast<int>(ys.size()));
    GpConfig gp_cfg = opts.gp;
    const Surrogate gp = Surrogate::fit(domain, xs, y, gp_cfg);
    Acquisition acq;
    acq.incumbent = result.best_value;
    acq.exploration = opts.exploration;
    acq.success_bias = opts.success_bias;
    const DomainPoint cand = suggest(gp, acq, rng.next_u64(), opts.suggest);
    evaluate(cand);
  }
  return result;
}

}  // namespace skf
