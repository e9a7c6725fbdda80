#pragma once

#include "skillforge/condition.hpp"

namespace skf {

// A trained skill ready for sequencing.
struct SkillModel {
  std::string id;
  TpHsmm hsmm;
  ConditionModel cond;
};

struct TaskStateInfo {
  int skill = 0;      // position in the task sequence
  int component = 0;  // component index in the original skill model
  int copy = 0;       // which copy of the skill this state belongs to
};

struct ComposeOptions {
  double prune_threshold = 0.0;  // drop stitched transitions below this, then renormalize
};

// Composed task model: one copy of each follow-up skill per final state of
// the prefix, stitched by condition-model KL weights. Per-state Gaussians
// stay in their skill's local frames; resolution against a concrete scene
// walks the effect-model chain.
struct TaskModel {
  std::vector<SkillModel> skills;
  MatX transitions;
  VecX initial;
  std::vector<DurationModel> durations;
  std::vector<int> finals;
  std::vector<TaskStateInfo> info;
  // copy_parent[n][c]: composed state index of the prefix final state that
  // copy c of skill n hangs off (-1 for the first skill's single copy).
  std::vector<std::vector<int>> copy_parent;

  int num_states() const { return static_cast<int>(info.size()); }

  bool is_final(int state) const {
    for (int f : finals) {
      if (f == state) return true;
    }
    return false;
  }

  // System state the chain predicts just before skill n, copy c, starts.
  SystemState state_before(int skill, int copy, const SystemState& scene) const;

  // Global Gaussian of a composed state under a concrete scene.
  PoseGaussian resolve_state(int state, const SystemState& scene) const;

  void validate() const;
};

// Predicted system state after executing `skill` ending in branch `k_final`,
// starting from `before`: effect-model Gaussians resolved under the initial
// frames, with frames built from their means.
SystemState predict_effect(const SkillModel& skill, int k_final, const SystemState& before);

TaskModel make_task(const SkillModel& skill);
TaskModel compose_pair(const SkillModel& a, const SkillModel& b, const ComposeOptions& opts = {});
TaskModel compose_sequence(const std::vector<SkillModel>& skills, const ComposeOptions& opts = {});
void append_skill(TaskModel& task, const SkillModel& next, const ComposeOptions& opts = {});

// Most-likely composed state sequence conditioned on the initial scene at the
// first step and the goal at the last step; emissions are 1 in between.
struct TaskPlan {
  std::vector<int> states;                      // composed indices, length = horizon
  std::vector<StateSequence> per_skill;         // references resolved at plan time
  std::vector<int> skill_of_step;               // task skill index per step
  std::vector<int> copy_of_skill;               // chosen copy per skill in the sequence
};

int default_horizon(const TaskModel& task);

TaskPlan plan(const TaskModel& task, const SystemState& initial, const SystemState& goal,
              int horizon = 0);

// Recompute the per-step references of skill n of the plan from an observed
// system state (replacing the effect-model prediction for that skill).
std::vector<PoseGaussian> update_online(const TaskModel& task, const TaskPlan& plan,
                                        const SystemState& observed, int skill_index);

}  // namespace skf
