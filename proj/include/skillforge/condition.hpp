#pragma once

#include <map>
#include <string>
#include <vector>

#include "skillforge/hsmm.hpp"

namespace skf {

// End-effector plus object poses; the full world description exchanged with
// the planner and the executor.
struct SystemState {
  Pose ee;
  std::map<std::string, Pose> objects;

  Pose entity(const std::string& id) const {
    if (id == "ee") return ee;
    auto it = objects.find(id);
    require(it != objects.end(), "missing object pose for '" + id + "'");
    return it->second;
  }
};

// Frame values for the given ids, derived from a system state. "global" is
// the identity, "robot" anchors at the end-effector, anything else is an
// object id.
FrameSet frames_from_state(const std::vector<std::string>& ids, const SystemState& state);

// One Gaussian per frame id, stored in that frame's local coordinates.
struct FrameGaussianSet {
  std::vector<std::string> frame_ids;
  std::vector<PoseGaussian> gaussians;

  const PoseGaussian* find(const std::string& id) const {
    for (size_t i = 0; i < frame_ids.size(); ++i) {
      if (frame_ids[i] == id) return &gaussians[i];
    }
    return nullptr;
  }

  // Product of the affine-transformed per-frame Gaussians under concrete
  // frame values.
  PoseGaussian resolve(const FrameSet& frames) const;
};

// Condition model: precondition / effect / final-condition TP-GMMs, one
// Gaussian set per skill branch (initial or final HSMM component).
struct ConditionModel {
  std::vector<std::string> init_frame_ids;   // task parameters from the initial state
  std::vector<std::string> final_frame_ids;  // task parameters from the final state
  std::map<int, FrameGaussianSet> precondition;                      // by initial component
  std::map<int, FrameGaussianSet> final_condition;                   // by final component
  std::map<int, std::map<std::string, FrameGaussianSet>> effect;     // by final component, entity

  void validate() const {
    require(!init_frame_ids.empty() && !final_frame_ids.empty(),
            "condition model frame sets must be non-empty");
  }
};

// Demonstration view for condition learning: the end-effector trajectory and
// the surrounding system states.
struct DemoView {
  std::vector<Pose> ee;
  SystemState initial_state;
  SystemState final_state;
};

struct ConditionOptions {
  double cov_floor = 1e-4;  // isotropic covariance floor for few-demo Gaussians
};

// Learn precondition/effect/final-condition Gaussians from demos, associating
// each demo with its initial and final HSMM component via the responsibility
// matrix used for fitting.
ConditionModel learn_condition_model(const TpHsmm& model, const std::vector<DemoView>& demos,
                                     const TpData<PoseManifold>& data, const MatX& resp,
                                     const std::vector<std::string>& init_frame_ids,
                                     const std::vector<std::string>& final_frame_ids,
                                     const ConditionOptions& opts = {});

// Unnormalized stitch weight between one final component's per-frame GMMs and
// one initial component's, exp(-sum of KL over the shared frames).
double kl_transition(const FrameGaussianSet& final_set, const FrameGaussianSet& init_set);

}  // namespace skf
