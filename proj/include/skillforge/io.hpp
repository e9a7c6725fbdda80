#pragma once

#include <optional>
#include <string>

#include "skillforge/compose.hpp"
#include "skillforge/impedance.hpp"
#include "skillforge/posekp.hpp"
#include "skillforge/scene.hpp"
#include "skillforge/sysid.hpp"

namespace skf {

// Versioned single-document JSON bundle: the trained skill, its condition
// model, and optionally the stiffness profile of a force-based skill.
struct SkillBundle {
  int version = 1;
  std::string id;
  std::string archetype;
  SkillModel skill;
  std::optional<StiffnessProfile> stiffness;
  std::uint64_t training_hash = 0;

  void validate() const {
    skill.hsmm.validate();
    skill.cond.validate();
    if (stiffness) stiffness->validate();
  }
};

void save_bundle(const SkillBundle& bundle, const std::string& path);
SkillBundle load_bundle(const std::string& path);

// Demonstration JSONL: one record per line with fields t, pose (7 numbers,
// position then quaternion wxyz), optional twist/accel/wrench, and the frame
// map object-id -> pose.
void save_demo_jsonl(const Demonstration& demo, const std::string& path);
Demonstration load_demo_jsonl(const std::string& path);

void save_state_json(const SystemState& state, const std::string& path);
SystemState load_state_json(const std::string& path);

// Serialized plan: the bundles it came from, the composed state sequence and
// the per-skill references resolved at planning time.
struct PlanFile {
  int version = 1;
  std::vector<std::string> bundle_paths;
  SystemState scene;
  SystemState goal;
  int horizon = 0;
  TaskPlan plan;
};

void save_plan(const PlanFile& plan, const std::string& path);
PlanFile load_plan(const std::string& path);

// Trace CSV: t, pose (7), twist (6), wrench (6), torques (n), then the joint
// positions (n) appended for identification consumers.
void save_trace_csv(const SimTrace& trace, const std::string& path);
SimTrace load_trace_csv(const std::string& path);

void save_report_json(const SuccessReport& report, const std::string& path);

std::vector<KeypointObservation> load_keypoints_jsonl(const std::string& path);
CameraIntrinsics load_intrinsics_json(const std::string& path);
// object model: {"object_id": ..., "keypoints": [{"id":..., "x","y","z"}]}
std::pair<std::string, AnnotatedCloud> load_annotated_model(const std::string& path);
void save_pose_json(const std::string& object_id, const RigidTransform& pose,
                    const std::string& path);

void save_excitation_json(const HarmonicTrajectory& traj, const std::string& path);
HarmonicTrajectory load_excitation_json(const std::string& path);

void save_params_json(const EstimateResult& result, const std::string& path);

// BO trace CSV: iteration, flattened candidate, objective, success, incumbent.
struct BoTraceRowFlat {
  int iteration;
  VecX candidate;
  double objective;
  bool success;
  double incumbent;
};
void save_bo_trace_csv(const std::vector<BoTraceRowFlat>& rows, const std::string& path);

std::uint64_t file_hash(const std::string& path);

}  // namespace skf
