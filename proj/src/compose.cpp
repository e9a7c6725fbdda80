#include "skillforge/compose.hpp"

#include <algorithm>

namespace skf {

SystemState predict_effect(const SkillModel& skill, int k_final, const SystemState& before) {
  const auto it = skill.cond.effect.find(k_final);
  require(it != skill.cond.effect.end(),
          "skill '" + skill.id + "' has no effect model for component " + std::to_string(k_final));
  const FrameSet frames = frames_from_state(skill.cond.init_frame_ids, before);
  SystemState after = before;
  for (const auto& [entity, set] : it->second) {
    const Pose predicted = set.resolve(frames).mean;
    if (entity == "ee") {
      after.ee = predicted;
    } else {
      after.objects[entity] = predicted;
    }
  }
  return after;
}

void TaskModel::validate() const {
  const int n = num_states();
  require(transitions.rows() == n && transitions.cols() == n, "task transition shape");
  require(initial.size() == n, "task initial length");
  require(std::abs(initial.sum() - 1.0) < 1e-9, "task initial must sum to 1");
  require(!finals.empty(), "task must keep at least one final state");
  for (int i = 0; i < n; ++i) {
    const double row = transitions.row(i).sum();
    if (std::abs(row) > 1e-12) {
      require(std::abs(row - 1.0) < 1e-9,
              "task transition row " + std::to_string(i) + " must sum to 1");
    } else {
      require(is_final(i), "non-final task state " + std::to_string(i) + " has a zero row");
    }
  }
}

SystemState TaskModel::state_before(int skill, int copy, const SystemState& scene) const {
  if (skill == 0) return scene;
  const int parent = copy_parent[skill][copy];
  const TaskStateInfo& pi = info[parent];
  const SystemState before_parent = state_before(pi.skill, pi.copy, scene);
  return predict_effect(skills[pi.skill], pi.component, before_parent);
}

PoseGaussian TaskModel::resolve_state(int state, const SystemState& scene) const {
  const TaskStateInfo& si = info[state];
  const SkillModel& skill = skills[si.skill];
  const SystemState before = state_before(si.skill, si.copy, scene);
  const FrameSet frames = frames_from_state(skill.hsmm.gmm.frame_ids, before);
  return skill.hsmm.gmm.global_component(si.component, frames);
}

TaskModel make_task(const SkillModel& skill) {
  TaskModel task;
  task.skills.push_back(skill);
  const int k = skill.hsmm.num_states();
  task.transitions = skill.hsmm.transitions;
  task.initial = skill.hsmm.initial;
  task.durations = skill.hsmm.durations;
  task.finals = skill.hsmm.final_states;
  for (int c = 0; c < k; ++c) task.info.push_back(TaskStateInfo{0, c, 0});
  task.copy_parent.push_back({-1});
  task.validate();
  return task;
}

void append_skill(TaskModel& task, const SkillModel& next, const ComposeOptions& opts) {
  require(!next.hsmm.final_states.empty(), "appended skill has no final states");
  const int skill_index = static_cast<int>(task.skills.size());
  const int kn = next.hsmm.num_states();
  const std::vector<int> old_finals = task.finals;
  require(!old_finals.empty(), "prefix task has no final states to extend");

  const int old_n = task.num_states();
  const int new_n = old_n + kn * static_cast<int>(old_finals.size());
  MatX trans = MatX::Zero(new_n, new_n);
  trans.topLeftCorner(old_n, old_n) = task.transitions;
  VecX initial = VecX::Zero(new_n);
  initial.head(old_n) = task.initial;

  // Initial components of the appended skill, candidates for stitching.
  std::vector<int> entries;
  for (int c = 0; c < kn; ++c) {
    if (next.hsmm.initial[c] > 0) entries.push_back(c);
  }
  require(!entries.empty(), "appended skill has no initial states");

  task.copy_parent.push_back({});
  std::vector<int> new_finals;
  int base = old_n;
  for (size_t copy = 0; copy < old_finals.size(); ++copy) {
    const int parent = old_finals[copy];
    task.copy_parent[skill_index].push_back(parent);

    // copy the skill's internal structure
    trans.block(base, base, kn, kn) = next.hsmm.transitions;
    for (int c = 0; c < kn; ++c) {
      task.info.push_back(TaskStateInfo{skill_index, c, static_cast<int>(copy)});
      task.durations.push_back(next.hsmm.durations[c]);
    }
    for (int f : next.hsmm.final_states) new_finals.push_back(base + f);

    // stitch transitions: final component of the prefix -> initial components
    // of this copy, weighted by condition-model KL.
    const TaskStateInfo& pi = task.info[parent];
    const SkillModel& prev_skill = task.skills[pi.skill];
    const auto ft = prev_skill.cond.final_condition.find(pi.component);
    require(ft != prev_skill.cond.final_condition.end(),
            "prefix final component lacks a final-condition model");
    VecX weights = VecX::Zero(static_cast<int>(entries.size()));
    for (size_t e = 0; e < entries.size(); ++e) {
      const auto pre = next.cond.precondition.find(entries[e]);
      require(pre != next.cond.precondition.end(),
              "appended skill lacks a precondition model for an initial component");
      weights[static_cast<int>(e)] = kl_transition(ft->second, pre->second);
    }
    if (opts.prune_threshold > 0) {
      const double total = weights.sum();
      for (int e = 0; e < weights.size(); ++e) {
        if (total > 0 && weights[e] / total < opts.prune_threshold) weights[e] = 0;
      }
    }
    require(weights.sum() > 0, "all stitch transitions pruned or zero");
    weights /= weights.sum();

    // Blend with any continuation the prefix final state already had, using
    // its empirical terminal frequency.
    const double fw = prev_skill.hsmm.final_weight[pi.component];
    trans.row(parent).head(old_n) *= (1.0 - fw);
    for (size_t e = 0; e < entries.size(); ++e) {
      trans(parent, base + entries[e]) = fw * weights[static_cast<int>(e)];
    }
    const double row_sum = trans.row(parent).sum();
    require(row_sum > 0, "stitched row has no outgoing probability");
    trans.row(parent) /= row_sum;

    base += kn;
  }

  task.skills.push_back(next);
  task.transitions = std::move(trans);
  task.initial = std::move(initial);
  task.finals = std::move(new_finals);
  task.validate();
}

TaskModel compose_pair(const SkillModel& a, const SkillModel& b, const ComposeOptions& opts) {
  TaskModel task = make_task(a);
  append_skill(task, b, opts);
  return task;
}

TaskModel compose_sequence(const std::vector<SkillModel>& skills, const ComposeOptions& opts) {
  require(!skills.empty(), "compose_sequence needs at least one skill");
  TaskModel task = make_task(skills.front());
  for (size_t i = 1; i < skills.size(); ++i) append_skill(task, skills[i], opts);
  return task;
}

namespace {

// Expected number of steps along the maximum-probability path from an
// initial to a final state of one skill.
int expected_skill_steps(const TpHsmm& model) {
  const int k = model.num_states();
  std::vector<double> best_len(k, -1.0);
  std::vector<int> order;
  for (int c = 0; c < k; ++c) {
    if (model.initial[c] > 0) {
      best_len[c] = model.durations[c].mean;
    }
  }
  // relax along max-prob transitions; bounded passes guard against cycles
  for (int pass = 0; pass < k; ++pass) {
    for (int h = 0; h < k; ++h) {
      if (best_len[h] < 0) continue;
      for (int c = 0; c < k; ++c) {
        if (model.transitions(h, c) <= 0) continue;
        const double cand = best_len[h] + model.durations[c].mean;
        if (cand > best_len[c]) best_len[c] = cand;
      }
    }
  }
  double total = 0;
  for (int f : model.final_states) total = std::max(total, best_len[f]);
  return std::max(2, static_cast<int>(std::lround(total)));
}

}  // namespace

int default_horizon(const TaskModel& task) {
  int total = 0;
  for (const auto& s : task.skills) total += expected_skill_steps(s.hsmm);
  return total;
}

TaskPlan plan(const TaskModel& task, const SystemState& initial, const SystemState& goal,
              int horizon) {
  if (horizon <= 0) horizon = default_horizon(task);
  const int n = task.num_states();

  std::vector<PoseGaussian> globals;
  globals.reserve(n);
  for (int s = 0; s < n; ++s) globals.push_back(task.resolve_state(s, initial));
  std::vector<GaussianEval<PoseManifold>> evals;
  evals.reserve(n);
  for (const auto& g : globals) evals.emplace_back(g);

  ForwardModel fm;
  fm.log_init = log_of(task.initial);
  fm.log_trans = log_of(task.transitions);
  for (const auto& d : task.durations) fm.log_dur.push_back(d.log_pmf());
  fm.dur = task.durations;

  auto emission = [&](int t, int s) -> double {
    if (t == 0) return evals[s].log_pdf(initial.ee);
    if (t == horizon - 1) return evals[s].log_pdf(goal.ee);
    return 0.0;
  };
  const MatX alpha = forward_log(fm, emission, horizon);

  double final_mass = kLogZero;
  for (int f : task.finals) final_mass = std::max(final_mass, alpha(horizon - 1, f));
  if (final_mass == kLogZero) {
    throw PlanningError("no path from any initial to any final state within horizon " +
                        std::to_string(horizon));
  }

  TaskPlan out;
  out.states.resize(horizon);
  out.skill_of_step.resize(horizon);
  for (int t = 0; t < horizon; ++t) {
    int best = 0;
    for (int s = 1; s < n; ++s) {
      if (alpha(t, s) > alpha(t, best)) best = s;
    }
    if (alpha(t, best) == kLogZero) {
      throw NumericalError("task forward variable underflow at step " + std::to_string(t));
    }
    out.states[t] = best;
    out.skill_of_step[t] = task.info[best].skill;
  }

  // Split into per-skill subsequences; record the copy taken per skill.
  out.per_skill.resize(task.skills.size());
  out.copy_of_skill.assign(task.skills.size(), 0);
  for (int t = 0; t < horizon; ++t) {
    const TaskStateInfo& si = task.info[out.states[t]];
    out.per_skill[si.skill].states.push_back(si.component);
    out.per_skill[si.skill].references.push_back(globals[out.states[t]]);
    out.copy_of_skill[si.skill] = si.copy;
  }
  return out;
}

std::vector<PoseGaussian> update_online(const TaskModel& task, const TaskPlan& plan,
                                        const SystemState& observed, int skill_index) {
  require(skill_index >= 0 && skill_index < static_cast<int>(plan.per_skill.size()),
          "skill index outside the plan");
  const SkillModel& skill = task.skills[skill_index];
  const FrameSet frames = frames_from_state(skill.hsmm.gmm.frame_ids, observed);
  std::vector<PoseGaussian> refs;
  refs.reserve(plan.per_skill[skill_index].states.size());
  for (int component : plan.per_skill[skill_index].states) {
    refs.push_back(skill.hsmm.gmm.global_component(component, frames));
  }
  return refs;
}

}  // namespace skf
