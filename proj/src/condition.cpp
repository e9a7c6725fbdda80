#include "skillforge/condition.hpp"

namespace skf {

FrameSet frames_from_state(const std::vector<std::string>& ids, const SystemState& state) {
  FrameSet out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    if (id == "global") {
      out.push_back(Frame::identity());
    } else if (id == "robot") {
      out.push_back(Frame::from_pose("robot", state.ee));
    } else {
      out.push_back(Frame::from_pose(id, state.entity(id)));
    }
  }
  return out;
}

PoseGaussian FrameGaussianSet::resolve(const FrameSet& frames) const {
  std::vector<PoseGaussian> transformed;
  transformed.reserve(frame_ids.size());
  for (size_t i = 0; i < frame_ids.size(); ++i) {
    transformed.push_back(transform_gaussian(gaussians[i], find_frame(frames, frame_ids[i])));
  }
  return gaussian_product<PoseManifold>(transformed);
}

namespace {

// Gaussian from a handful of poses: Frechet mean plus floored scatter.
PoseGaussian pose_gaussian(const std::vector<Pose>& pts, double cov_floor) {
  const VecX w = VecX::Ones(static_cast<int>(pts.size()));
  const Pose mean = frechet_mean<PoseManifold>(pts, w, pts.front());
  MatX cov = MatX::Zero(6, 6);
  for (const auto& p : pts) {
    const VecX u = r3s3::log(mean, p);
    cov += u * u.transpose();
  }
  cov /= static_cast<double>(pts.size());
  cov.diagonal().array() += cov_floor;
  return PoseGaussian{mean, cov};
}

FrameGaussianSet fit_set(const std::vector<std::vector<Pose>>& per_frame_pts,
                         const std::vector<std::string>& ids, double cov_floor) {
  FrameGaussianSet set;
  set.frame_ids = ids;
  for (const auto& pts : per_frame_pts) set.gaussians.push_back(pose_gaussian(pts, cov_floor));
  return set;
}

}  // namespace

ConditionModel learn_condition_model(const TpHsmm& model, const std::vector<DemoView>& demos,
                                     const TpData<PoseManifold>& data, const MatX& resp,
                                     const std::vector<std::string>& init_frame_ids,
                                     const std::vector<std::string>& final_frame_ids,
                                     const ConditionOptions& opts) {
  require(demos.size() >= 2, "condition model needs at least two demos");
  const int m = static_cast<int>(demos.size());
  require(data.num_demos() == m, "demo count mismatch between data and views");

  // First/last component per demo from the responsibilities.
  std::vector<int> first_comp(m, -1), last_comp(m, -1);
  for (int i = 0; i < data.num_samples(); ++i) {
    int best = 0;
    resp.row(i).maxCoeff(&best);
    if (data.step[i] == 0) first_comp[data.demo_id[i]] = best;
    last_comp[data.demo_id[i]] = best;  // overwritten until the last row of the demo
  }

  // Entities predicted by the effect model: end-effector plus every object
  // present in the final states.
  std::vector<std::string> entities = {"ee"};
  for (const auto& [id, pose] : demos.front().final_state.objects) entities.push_back(id);

  ConditionModel cond;
  cond.init_frame_ids = init_frame_ids;
  cond.final_frame_ids = final_frame_ids;

  auto demos_with = [&](const std::vector<int>& assoc, int k) {
    std::vector<int> out;
    for (int d = 0; d < m; ++d) {
      if (assoc[d] == k) out.push_back(d);
    }
    return out;
  };

  std::set<int> initial_comps(first_comp.begin(), first_comp.end());
  for (int k : initial_comps) {
    const auto members = demos_with(first_comp, k);
    std::vector<std::vector<Pose>> pts(init_frame_ids.size());
    for (int d : members) {
      const FrameSet frames = frames_from_state(init_frame_ids, demos[d].initial_state);
      for (size_t p = 0; p < frames.size(); ++p) {
        pts[p].push_back(frames[p].unapply(demos[d].ee.front()));
      }
    }
    cond.precondition[k] = fit_set(pts, init_frame_ids, opts.cov_floor);
  }

  std::set<int> final_comps(last_comp.begin(), last_comp.end());
  for (int k : final_comps) {
    const auto members = demos_with(last_comp, k);
    {
      std::vector<std::vector<Pose>> pts(final_frame_ids.size());
      for (int d : members) {
        const FrameSet frames = frames_from_state(final_frame_ids, demos[d].final_state);
        for (size_t p = 0; p < frames.size(); ++p) {
          pts[p].push_back(frames[p].unapply(demos[d].ee.back()));
        }
      }
      cond.final_condition[k] = fit_set(pts, final_frame_ids, opts.cov_floor);
    }
    for (const auto& entity : entities) {
      std::vector<std::vector<Pose>> pts(init_frame_ids.size());
      for (int d : members) {
        const FrameSet frames = frames_from_state(init_frame_ids, demos[d].initial_state);
        const Pose final_pose = demos[d].final_state.entity(entity);
        for (size_t p = 0; p < frames.size(); ++p) pts[p].push_back(frames[p].unapply(final_pose));
      }
      cond.effect[k][entity] = fit_set(pts, init_frame_ids, opts.cov_floor);
    }
  }

  cond.validate();
  return cond;
}

double kl_transition(const FrameGaussianSet& final_set, const FrameGaussianSet& init_set) {
  double total = 0;
  int common = 0;
  for (size_t i = 0; i < final_set.frame_ids.size(); ++i) {
    const PoseGaussian* other = init_set.find(final_set.frame_ids[i]);
    if (!other) continue;
    ++common;
    total += kl_divergence<PoseManifold>(final_set.gaussians[i], *other);
  }
  require(common > 0, "kl_transition: no common frames (global frame missing?)");
  return std::exp(-total);
}

}  // namespace skf
