#pragma once

#include <string>
#include <vector>

#include "skillforge/manifold.hpp"
#include "skillforge/types.hpp"

namespace skf {

// Task parameter: an object-attached coordinate system. Points map to the
// world by x -> A x + b; orientations are rotated from the left.
struct Frame {
  std::string id;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Frame identity(std::string id = "global") { return Frame{std::move(id)}; }

  static Frame from_pose(std::string id, const Pose& p) {
    return Frame{std::move(id), p.orientation.rotation_matrix(), p.position};
  }

  Pose origin_pose() const {
    return Pose{translation, UnitQuaternion::from_rotation_matrix(rotation)};
  }

  Frame inverse() const {
    return Frame{id, rotation.transpose(), -(rotation.transpose() * translation)};
  }

  Pose apply(const Pose& p) const {
    return Pose{rotation * p.position + translation,
                UnitQuaternion::from_rotation_matrix(rotation) * p.orientation};
  }

  Pose unapply(const Pose& p) const {
    return Pose{rotation.transpose() * (p.position - translation),
                UnitQuaternion::from_rotation_matrix(rotation).conjugate() * p.orientation};
  }

  // Action on R^3 x S^3 tangent coordinates. Orientation block is identity
  // because orientation tangents are body-frame quantities.
  Mat6 tangent() const {
    Mat6 t = Mat6::Identity();
    t.block<3, 3>(0, 0) = rotation;
    return t;
  }

  bool is_identity(double tol = 1e-12) const {
    return (rotation - Mat3::Identity()).norm() < tol && translation.norm() < tol;
  }
};

using FrameSet = std::vector<Frame>;

inline const Frame& find_frame(const FrameSet& frames, const std::string& id) {
  for (const auto& f : frames) {
    if (f.id == id) return f;
  }
  throw ValidationError("frame '" + id + "' missing from scene");
}

// Gaussian on a manifold: mean point plus covariance in the tangent space at
// the mean.
template <class M>
struct Gaussian {
  typename M::Point mean;
  MatX covariance;

  int dim() const { return static_cast<int>(covariance.rows()); }
};

using PoseGaussian = Gaussian<PoseManifold>;

// Cached evaluation state for repeated density queries. Owns a copy of the
// Gaussian so temporaries can be passed in.
template <class M>
struct GaussianEval {
  explicit GaussianEval(Gaussian<M> g) : gaussian(std::move(g)), llt(gaussian.covariance) {
    require(llt.info() == Eigen::Success, "covariance not positive definite");
    log_det = 2.0 * MatX(llt.matrixL()).diagonal().array().log().sum();
    log_norm = -0.5 * (gaussian.dim() * std::log(2.0 * M_PI) + log_det);
  }

  double log_pdf(const typename M::Point& x) const {
    const VecX u = M::log(gaussian.mean, x);
    return log_norm - 0.5 * u.dot(llt.solve(u));
  }

  double log_pdf_tangent(const VecX& u) const {
    return log_norm - 0.5 * u.dot(llt.solve(u));
  }

  Gaussian<M> gaussian;
  Eigen::LLT<MatX> llt;
  double log_det = 0;
  double log_norm = 0;
};

template <class M>
double log_pdf(const Gaussian<M>& g, const typename M::Point& x) {
  return GaussianEval<M>(g).log_pdf(x);
}

// Product of Gaussian components, computed iteratively in the tangent space
// of the running mean estimate. On Euclidean manifolds this reduces to the
// closed-form precision-weighted product in one step.
template <class M>
Gaussian<M> gaussian_product(const std::vector<Gaussian<M>>& components) {
  require(!components.empty(), "gaussian product needs at least one component");
  if (components.size() == 1) return components.front();

  const int d = components.front().dim();
  typename M::Point est = components.front().mean;
  MatX sigma_hat = MatX::Identity(d, d);
  for (int iter = 0; iter < 100; ++iter) {
    MatX lambda_sum = MatX::Zero(d, d);
    VecX rhs = VecX::Zero(d);
    for (const auto& c : components) {
      const MatX t = M::transport(c.mean, est);
      const MatX cov_here = t * c.covariance * t.transpose();
      Eigen::LLT<MatX> llt(cov_here);
      if (llt.info() != Eigen::Success) throw NumericalError("non-SPD covariance in product");
      const MatX lambda = llt.solve(MatX::Identity(d, d));
      lambda_sum += lambda;
      rhs += lambda * M::log(est, c.mean);
    }
    Eigen::LLT<MatX> llt_sum(lambda_sum);
    if (llt_sum.info() != Eigen::Success) throw NumericalError("singular precision sum in product");
    sigma_hat = llt_sum.solve(MatX::Identity(d, d));
    const VecX delta = sigma_hat * rhs;
    est = M::exp(est, delta);
    if (delta.norm() < 1e-13) break;
  }
  return Gaussian<M>{est, 0.5 * (sigma_hat + sigma_hat.transpose())};
}

// Affine transform of a pose Gaussian by a task frame: mean mapped through
// the frame, covariance congruence-transformed by the frame's tangent action.
inline PoseGaussian transform_gaussian(const PoseGaussian& g, const Frame& frame) {
  const Mat6 t = frame.tangent();
  return PoseGaussian{frame.apply(g.mean), t * g.covariance * t.transpose()};
}

// KL divergence KL(a || b) with a's covariance parallel-transported into b's
// tangent space; exact on Euclidean manifolds.
template <class M>
double kl_divergence(const Gaussian<M>& a, const Gaussian<M>& b) {
  const int d = a.dim();
  const MatX t = M::transport(a.mean, b.mean);
  const MatX cov_a = t * a.covariance * t.transpose();
  const VecX delta = M::log(b.mean, a.mean);
  Eigen::LLT<MatX> llt_b(b.covariance);
  require(llt_b.info() == Eigen::Success, "KL: covariance not positive definite");
  const double log_det_b = 2.0 * MatX(llt_b.matrixL()).diagonal().array().log().sum();
  Eigen::LLT<MatX> llt_a(a.covariance);
  require(llt_a.info() == Eigen::Success, "KL: covariance not positive definite");
  const double log_det_a = 2.0 * MatX(llt_a.matrixL()).diagonal().array().log().sum();
  const double tr = llt_b.solve(cov_a).trace();
  const double quad = delta.dot(llt_b.solve(delta));
  return 0.5 * (tr + quad - d + log_det_b - log_det_a);
}

// Weighted Frechet mean by tangent-space fixed point iteration.
template <class M>
typename M::Point frechet_mean(const std::vector<typename M::Point>& points,
                               const VecX& weights, typename M::Point init,
                               int max_iter = 50, double tol = 1e-9) {
  const double wsum = weights.sum();
  require(wsum > 0, "frechet mean needs positive total weight");
  typename M::Point mean = init;
  for (int iter = 0; iter < max_iter; ++iter) {
    VecX acc = VecX::Zero(M::kDim);
    for (size_t i = 0; i < points.size(); ++i) {
      if (weights[static_cast<int>(i)] == 0.0) continue;
      acc += weights[static_cast<int>(i)] * M::log(mean, points[i]);
    }
    acc /= wsum;
    mean = M::exp(mean, acc);
    if (acc.norm() < tol) break;
  }
  return mean;
}

}  // namespace skf
