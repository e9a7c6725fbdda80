#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "skillforge/gaussian.hpp"
#include "skillforge/rng.hpp"

namespace skf {

// Frame handling for the generic TP layer. Pose frames are full rigid task
// parameters; sphere fixtures use plain rotations.
template <class M>
struct FrameTraits;

template <>
struct FrameTraits<PoseManifold> {
  using Frame = skf::Frame;
  static Pose apply(const Frame& f, const Pose& p) { return f.apply(p); }
  static MatX tangent(const Frame& f, const Pose&) { return f.tangent(); }
  static Frame identity() { return Frame::identity(); }
};

struct SphereFrame {
  std::string id = "global";
  Mat3 rotation = Mat3::Identity();
};

template <>
struct FrameTraits<Sphere2Manifold> {
  using Frame = SphereFrame;
  static Vec3 apply(const Frame& f, const Vec3& x) { return f.rotation * x; }
  static MatX tangent(const Frame& f, const Vec3& x) {
    Vec3 e1, e2, g1, g2;
    s2::basis(x, e1, e2);
    const Vec3 y = f.rotation * x;
    s2::basis(y, g1, g2);
    Mat2 m;
    m << g1.dot(f.rotation * e1), g1.dot(f.rotation * e2), g2.dot(f.rotation * e1),
        g2.dot(f.rotation * e2);
    return m;
  }
  static Frame identity() { return SphereFrame{}; }
};

template <int N>
struct FrameTraits<EuclideanManifold<N>> {
  struct Frame {
    std::string id = "global";
    MatX rotation = MatX::Identity(N, N);
    VecX translation = VecX::Zero(N);
  };
  using Point = typename EuclideanManifold<N>::Point;
  static Point apply(const Frame& f, const Point& x) { return f.rotation * x + f.translation; }
  static MatX tangent(const Frame& f, const Point&) { return f.rotation; }
  static Frame identity() { return Frame{}; }
};

template <class M>
Gaussian<M> transform_gaussian_t(const Gaussian<M>& g, const typename FrameTraits<M>::Frame& f) {
  const MatX t = FrameTraits<M>::tangent(f, g.mean);
  return Gaussian<M>{FrameTraits<M>::apply(f, g.mean), MatX(t * g.covariance * t.transpose())};
}

// Task-parametrized GMM: shared priors, one Gaussian per (component, frame),
// stored in local frame coordinates.
template <class M>
struct TpGmmT {
  VecX priors;
  std::vector<std::string> frame_ids;
  std::vector<std::vector<Gaussian<M>>> components;  // [K][P]

  int num_components() const { return static_cast<int>(components.size()); }
  int num_frames() const { return static_cast<int>(frame_ids.size()); }

  void validate() const {
    require(num_components() > 0, "TP-GMM has no components");
    require(priors.size() == num_components(), "priors length mismatch");
    require(std::abs(priors.sum() - 1.0) < 1e-9, "priors must sum to 1");
    for (const auto& row : components) {
      require(static_cast<int>(row.size()) == num_frames(), "component/frame grid not full");
    }
  }

  // Global Gaussian of component k for concrete frame values (product of the
  // affine-transformed per-frame Gaussians).
  Gaussian<M> global_component(int k, const std::vector<typename FrameTraits<M>::Frame>& frames) const {
    require(static_cast<int>(frames.size()) == num_frames(), "frame count mismatch");
    std::vector<Gaussian<M>> transformed;
    transformed.reserve(frames.size());
    for (int p = 0; p < num_frames(); ++p) {
      transformed.push_back(transform_gaussian_t<M>(components[k][p], frames[p]));
    }
    return gaussian_product<M>(transformed);
  }
};

using TpGmm = TpGmmT<PoseManifold>;

// Flattened training set: aligned per-frame views of every sample, plus the
// demo/step bookkeeping needed by the temporal layer.
template <class M>
struct TpData {
  std::vector<std::string> frame_ids;
  std::vector<std::vector<typename M::Point>> samples;  // [P][N]
  std::vector<int> demo_id;                             // [N]
  std::vector<int> step;                                // [N]

  int num_frames() const { return static_cast<int>(samples.size()); }
  int num_samples() const { return samples.empty() ? 0 : static_cast<int>(samples[0].size()); }
  int num_demos() const {
    int m = 0;
    for (int d : demo_id) m = std::max(m, d + 1);
    return m;
  }
};

// Project a global-frame trajectory into a task frame: xi -> A^-1 (xi - b).
inline std::vector<Pose> project_to_frame(const std::vector<Pose>& traj, const Frame& frame) {
  std::vector<Pose> out;
  out.reserve(traj.size());
  for (const auto& p : traj) out.push_back(frame.unapply(p));
  return out;
}

inline std::vector<Pose> unproject_from_frame(const std::vector<Pose>& traj, const Frame& frame) {
  std::vector<Pose> out;
  out.reserve(traj.size());
  for (const auto& p : traj) out.push_back(frame.apply(p));
  return out;
}

// Build a TpData block from global demos and their per-demo frame values.
inline TpData<PoseManifold> project_demos(const std::vector<std::vector<Pose>>& demos,
                                          const std::vector<FrameSet>& demo_frames,
                                          const std::vector<std::string>& frame_ids) {
  require(demos.size() == demo_frames.size(), "demo/frame count mismatch");
  TpData<PoseManifold> data;
  data.frame_ids = frame_ids;
  data.samples.resize(frame_ids.size());
  for (size_t m = 0; m < demos.size(); ++m) {
    for (size_t p = 0; p < frame_ids.size(); ++p) {
      const Frame& f = find_frame(demo_frames[m], frame_ids[p]);
      for (const auto& pose : demos[m]) data.samples[p].push_back(f.unapply(pose));
    }
    for (size_t t = 0; t < demos[m].size(); ++t) {
      data.demo_id.push_back(static_cast<int>(m));
      data.step.push_back(static_cast<int>(t));
    }
  }
  return data;
}

struct EmOptions {
  int max_iter = 100;
  double tol = 1e-8;          // absolute log-likelihood gain to declare convergence
  double cov_reg = 1e-6;      // added to covariance diagonals after each M-step
  double mass_floor = 1e-6;   // responsibility mass below this degenerates
  int kmeans_iters = 10;
};

template <class M>
struct EmResult {
  TpGmmT<M> model;
  std::vector<double> log_likelihood;  // one entry per EM iteration
  MatX responsibilities;               // [N][K], from the final E-step
  bool converged = false;
};

namespace detail {

inline std::vector<int> kmeans_pp(const std::vector<VecX>& pts, int k, Rng& rng, int iters) {
  const int n = static_cast<int>(pts.size());
  std::vector<VecX> centers;
  centers.push_back(pts[static_cast<int>(rng.index(n))]);
  std::vector<double> d2(n, 0.0);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (const auto& c : centers) best = std::min(best, (pts[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    if (total <= 0) {
      centers.push_back(pts[static_cast<int>(rng.index(n))]);
      continue;
    }
    double target = rng.uniform() * total;
    int pick = n - 1;
    double acc = 0;
    for (int i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= target) {
        pick = i;
        break;
      }
    }
    centers.push_back(pts[pick]);
  }
  std::vector<int> assign(n, 0);
  for (int it = 0; it < iters; ++it) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        const double d = (pts[i] - centers[c]).squaredNorm();
        if (d < best) {
          best = d;
          assign[i] = c;
        }
      }
    }
    for (int c = 0; c < k; ++c) {
      VecX mean = VecX::Zero(pts[0].size());
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (assign[i] == c) {
          mean += pts[i];
          ++count;
        }
      }
      if (count > 0) centers[c] = mean / count;
    }
  }
  return assign;
}

}  // namespace detail

// EM for a task-parametrized mixture on a manifold. Riemannian means are
// computed by the iterated tangent-space fixed point; covariances get a small
// diagonal floor after each M-step. Deterministic for a fixed seed.
template <class M>
EmResult<M> em_fit(const TpData<M>& data, int k, std::uint64_t seed, const EmOptions& opts = {}) {
  const int n = data.num_samples();
  const int num_frames = data.num_frames();
  const int d = M::kDim;
  require(k >= 1, "K must be at least 1");
  require(n >= 5 * k, "need at least 5 samples per component");

  // Global Frechet mean per frame, then k-means++ on concatenated tangent
  // coordinates for the initial hard assignment.
  std::vector<typename M::Point> frame_means;
  for (int p = 0; p < num_frames; ++p) {
    frame_means.push_back(
        frechet_mean<M>(data.samples[p], VecX::Ones(n), data.samples[p][0]));
  }
  // k-means++ features: tangent coordinates at the per-frame means plus the
  // normalized step fraction. The time feature keeps initial components
  // temporally coherent, which the duration layer depends on.
  std::vector<int> demo_len(data.num_demos(), 1);
  for (int i = 0; i < n; ++i) {
    demo_len[data.demo_id[i]] = std::max(demo_len[data.demo_id[i]], data.step[i] + 1);
  }
  std::vector<VecX> coords(n, VecX(num_frames * d + 1));
  double rms = 0;
  for (int i = 0; i < n; ++i) {
    for (int p = 0; p < num_frames; ++p) {
      coords[i].segment(p * d, d) = M::log(frame_means[p], data.samples[p][i]);
    }
    rms += coords[i].head(num_frames * d).squaredNorm();
  }
  rms = std::sqrt(rms / (n * num_frames * d));
  const double time_weight = 3.0 * std::max(rms, 1e-6);
  for (int i = 0; i < n; ++i) {
    const double frac = static_cast<double>(data.step[i]) / std::max(1, demo_len[data.demo_id[i]] - 1);
    coords[i][num_frames * d] = time_weight * frac;
  }
  Rng rng(seed);
  const std::vector<int> assign = detail::kmeans_pp(coords, k, rng, opts.kmeans_iters);

  MatX resp = MatX::Constant(n, k, 1e-9);
  for (int i = 0; i < n; ++i) resp(i, assign[i]) = 1.0;

  TpGmmT<M> model;
  model.frame_ids = data.frame_ids;
  model.priors = VecX::Constant(k, 1.0 / k);
  model.components.assign(k, std::vector<Gaussian<M>>(num_frames));
  for (int c = 0; c < k; ++c) {
    for (int p = 0; p < num_frames; ++p) model.components[c][p].mean = frame_means[p];
  }

  auto m_step = [&]() {
    for (int c = 0; c < k; ++c) {
      const VecX w = resp.col(c);
      const double mass = w.sum();
      if (mass < opts.mass_floor) {
        throw NumericalError("EM degenerated: component " + std::to_string(c) +
                             " has responsibility mass " + std::to_string(mass));
      }
      for (int p = 0; p < num_frames; ++p) {
        auto& g = model.components[c][p];
        g.mean = frechet_mean<M>(data.samples[p], w, g.mean);
        MatX cov = MatX::Zero(d, d);
        for (int i = 0; i < n; ++i) {
          if (w[i] == 0.0) continue;
          const VecX u = M::log(g.mean, data.samples[p][i]);
          cov += w[i] * u * u.transpose();
        }
        cov /= mass;
        cov.diagonal().array() += opts.cov_reg;
        g.covariance = 0.5 * (cov + cov.transpose());
      }
      model.priors[c] = mass / n;
    }
    model.priors /= model.priors.sum();
  };
  m_step();

  EmResult<M> result;
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // E-step in log space.
    std::vector<std::vector<GaussianEval<M>>> evals(k);
    for (int c = 0; c < k; ++c) {
      for (int p = 0; p < num_frames; ++p) evals[c].emplace_back(model.components[c][p]);
    }
    double ll = 0;
    for (int i = 0; i < n; ++i) {
      VecX lp(k);
      for (int c = 0; c < k; ++c) {
        double acc = std::log(model.priors[c]);
        for (int p = 0; p < num_frames; ++p) acc += evals[c][p].log_pdf(data.samples[p][i]);
        lp[c] = acc;
      }
      const double mx = lp.maxCoeff();
      const double lse = mx + std::log((lp.array() - mx).exp().sum());
      ll += lse;
      resp.row(i) = (lp.array() - lse).exp();
    }
    result.log_likelihood.push_back(ll);
    if (ll - prev_ll < opts.tol && iter > 0) {
      result.converged = true;
      break;
    }
    prev_ll = ll;
    m_step();
  }
  result.model = std::move(model);
  result.model.validate();
  result.responsibilities = std::move(resp);
  return result;
}

// Mixture log-likelihood of a global-frame trajectory under concrete frames.
template <class M>
double log_likelihood(const TpGmmT<M>& model,
                      const std::vector<typename FrameTraits<M>::Frame>& frames,
                      const std::vector<typename M::Point>& traj) {
  const int k = model.num_components();
  std::vector<Gaussian<M>> global;
  global.reserve(k);
  for (int c = 0; c < k; ++c) global.push_back(model.global_component(c, frames));
  std::vector<GaussianEval<M>> evals;
  evals.reserve(k);
  for (const auto& g : global) evals.emplace_back(g);
  double ll = 0;
  for (const auto& x : traj) {
    VecX lp(k);
    for (int c = 0; c < k; ++c) lp[c] = std::log(model.priors[c]) + evals[c].log_pdf(x);
    const double mx = lp.maxCoeff();
    ll += mx + std::log((lp.array() - mx).exp().sum());
  }
  return ll;
}

}  // namespace skf
