#pragma once

#include "skillforge/io.hpp"

namespace skf {

// Command-level operations shared by the C API and the test suites. All
// functions throw skf::Error subtypes; the CLI maps the status to its exit
// code.

struct GenerateOptions {
  std::string preset_name = "reach";
  std::uint64_t seed = 0;
  std::string out_dir;
  int count_override = 0;  // 0 keeps the preset's demo count
};

struct GenerateResult {
  std::vector<std::string> demo_files;
  std::string scene_file;
  std::string goal_file;
  int suggested_components = 0;
};

GenerateResult run_generate(const GenerateOptions& opts);

struct TrainOptions {
  int components = 8;
  std::vector<std::string> frame_ids;  // empty: every frame in the demos
  bool force = false;
  std::uint64_t seed = 0;
  std::string skill_id = "skill";
  std::string archetype = "reach";
};

SkillBundle train_skill(const std::vector<Demonstration>& demos, const TrainOptions& opts);
SkillBundle run_train(const std::vector<std::string>& demo_files, const TrainOptions& opts,
                      const std::string& out_bundle);

struct ComposePlanOptions {
  int horizon = 0;  // 0: derived from duration statistics
  double prune_threshold = 0.0;
};

PlanFile run_compose_plan(const std::vector<std::string>& bundle_files,
                          const std::string& scene_file, const std::string& goal_file,
                          const ComposePlanOptions& opts, const std::string& out_plan);

struct ExecuteOptions {
  double dt = 1e-3;
  double lqt_dt = 0.02;
  double control_cost = 1e-4;
  Tolerances tolerances;
};

struct ExecuteResult {
  SimTrace trace;
  SuccessReport report;
  Pose evaluated_goal;
};

ExecuteResult run_execute(const std::string& plan_file, const std::string& scene_file,
                          const ExecuteOptions& opts, const std::string& out_trace_csv,
                          const std::string& out_report_json);

struct IdentifyOptions {
  double omega_b = 2 * M_PI * 0.1;
  int harmonics = 4;
  std::uint64_t seed = 0;
  double noise = 0.0;       // torque noise fraction for simulated data
  int samples = 240;
  std::string data_csv;     // when set, ingest instead of simulating
  std::string excitation_out;
};

EstimateResult run_identify(const IdentifyOptions& opts, const std::string& out_params_json);

struct PoseOptions {
  double confidence_floor = 0.5;
};

RigidTransform run_pose(const std::string& keypoints_jsonl, const std::string& intrinsics_json,
                        const std::string& model_json, const PoseOptions& opts,
                        const std::string& out_pose_json);

struct RefineOptions {
  int budget = 20;
  std::uint64_t seed = 0;
  std::string scene_file;         // resolves the skill's frames
  Vec3 belief_offset = Vec3(0.001, 0.0008, 0);  // simulated model error
  double position_range = 0.004;  // search box half-width around the mean
  double orientation_range = 0.15;
  double stiffness_log_range = 0.9;
  double force_weight = 1.0;
  double pose_weight = 1.0;
};

struct RefineResult {
  SkillBundle bundle;
  double initial_objective = 0;
  double best_objective = 0;
  InsertionOutcome initial_outcome, refined_outcome;
};

RefineResult run_refine(const std::string& bundle_file, const RefineOptions& opts,
                        const std::string& out_bundle, const std::string& out_trace_csv);

}  // namespace skf
