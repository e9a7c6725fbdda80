#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "skillforge/manifold.hpp"
#include "skillforge/rng.hpp"

namespace skf {

// Search-domain factors. Kernel distances: Euclidean norm, chordal distance
// on spheres (always PSD with a squared-exponential, unlike the geodesic
// kernel), log-Euclidean distance on the SPD cone.
struct EuclideanFactor {
  VecX lo, hi;
};
struct QuaternionFactor {
  UnitQuaternion center;
  double max_angle = 0.5;  // geodesic trust region
};
struct Sphere2Factor {
  Vec3 center = Vec3::UnitZ();
  double max_angle = M_PI;  // full sphere by default
};
struct SpdFactor {
  SpdMatrix center;
  double max_log_ratio = 1.0;  // Frobenius bound on log-coordinate offsets
  double eig_floor = 1e-8;
};

using DomainFactor = std::variant<EuclideanFactor, QuaternionFactor, Sphere2Factor, SpdFactor>;

struct SearchDomain {
  std::vector<DomainFactor> factors;
};

// Candidate point: one encoded block per factor (Euclidean raw, quaternion
// wxyz, sphere unit vector, SPD log-Euclidean coordinates).
struct DomainPoint {
  std::vector<VecX> blocks;
};

DomainPoint random_point(const SearchDomain& domain, Rng& rng);
bool point_in_domain(const SearchDomain& domain, const DomainPoint& p, double tol = 1e-9);
double factor_distance2(const DomainFactor& f, const VecX& a, const VecX& b);

UnitQuaternion quaternion_of(const DomainPoint& p, int block);
SpdMatrix spd_of(const SearchDomain& domain, const DomainPoint& p, int block);
DomainPoint make_point(const SearchDomain& domain, const std::vector<VecX>& blocks);
VecX encode_spd(const SpdMatrix& s);

struct GpConfig {
  double noise_var = 1e-6;
  bool optimize_hyperparams = true;
  VecX fixed_lengthscales;    // one per factor, used when not optimizing
  double fixed_signal_var = 1.0;
  double max_jitter = 1e-6;
};

// Exact GP over the product domain: squared-exponential on the per-factor
// distances with one lengthscale per factor, hyperparameters by marginal-
// likelihood coordinate search. The Gram matrix is validated PSD each fit.
class Surrogate {
 public:
  static Surrogate empty(const SearchDomain& domain) { return Surrogate(domain); }

  static Surrogate fit(const SearchDomain& domain, const std::vector<DomainPoint>& x,
                       const VecX& y, const GpConfig& config = {});

  int size() const { return static_cast<int>(x_.size()); }
  const SearchDomain& domain() const { return domain_; }

  struct Posterior {
    double mean = 0, variance = 0;
  };
  Posterior posterior(const DomainPoint& p) const;

  double prior_mean() const { return mean_; }
  const std::vector<DomainPoint>& points() const { return x_; }
  const VecX& targets() const { return y_; }

 private:
  explicit Surrogate(SearchDomain domain) : domain_(std::move(domain)) {}
  double kernel(const DomainPoint& a, const DomainPoint& b) const;

  SearchDomain domain_;
  std::vector<DomainPoint> x_;
  VecX y_;
  double mean_ = 0;
  VecX lengthscales_;
  double signal_var_ = 1.0;
  double noise_var_ = 1e-6;
  Eigen::LLT<MatX> llt_;
  VecX alpha_;
};

// Expected improvement for maximization, optionally multiplied by a success
// probability.
struct Acquisition {
  double incumbent = 0;
  double exploration = 0.01;
  std::function<double(const DomainPoint&)> success_bias;  // empty: no bias

  double operator()(const Surrogate& gp, const DomainPoint& p) const;
};

struct SuggestOptions {
  int multistarts = 20;
  int steps = 50;
  double step_size = 0.1;
};

// Acquisition maximization: Euclidean blocks by projected gradient steps,
// sphere blocks by tangent steps with retraction, SPD blocks in log
// coordinates; candidates always satisfy the manifold constraints exactly.
DomainPoint suggest(const Surrogate& gp, const Acquisition& acq, std::uint64_t seed,
                    const SuggestOptions& opts = {});

// GP classifier for success labels: regression on centered labels squashed
// through a probit link.
class SuccessClassifier {
 public:
  static SuccessClassifier fit(const SearchDomain& domain, const std::vector<DomainPoint>& x,
                               const std::vector<int>& labels, const GpConfig& config = {});
  double probability(const DomainPoint& p) const;

 private:
  Surrogate gp_ = Surrogate::empty(SearchDomain{});
};

struct BoOptions {
  GpConfig gp;
  SuggestOptions suggest;
  double exploration = 0.01;
  std::function<double(const DomainPoint&)> success_bias;
};

struct BoTraceRow {
  int iteration = 0;
  DomainPoint candidate;
  double objective = 0;
  bool success = true;
  double incumbent = 0;
};

struct BoResult {
  DomainPoint best;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<BoTraceRow> trace;
};

// Objective returns (value, success flag).
using BoObjective = std::function<std::pair<double, bool>(const DomainPoint&)>;

// Sequential BO loop: evaluates the seed points first, then fits the
// surrogate and maximizes expected improvement each round. Deterministic for
// a fixed seed.
BoResult bo_maximize(const SearchDomain& domain, const BoObjective& objective,
                     const std::vector<DomainPoint>& seed_points, int budget,
                     std::uint64_t seed, const BoOptions& opts = {});

}  // namespace skf
