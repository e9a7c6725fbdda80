#pragma once

#include <optional>
#include <string>
#include <vector>

#include "skillforge/attractor.hpp"
#include "skillforge/condition.hpp"

namespace skf {

enum class Archetype { reach, press, insert, slide, reorient };

Archetype archetype_from_string(const std::string& s);
std::string to_string(Archetype a);

struct ObjectSpec {
  std::string id = "obj";
  Pose nominal;
  Vec3 position_range = Vec3(0.04, 0.04, 0.0);  // uniform half-width per axis
  double yaw_range = 0.25;                      // rad
};

struct SceneSpec {
  std::vector<ObjectSpec> objects;
  Vec3 workspace_lo = Vec3(-1.0, -1.0, -0.2);
  Vec3 workspace_hi = Vec3(1.2, 1.2, 1.4);
  std::uint64_t seed = 0;
};

enum class BranchRule { round_robin, by_object_x };

struct DemoSpec {
  Archetype archetype = Archetype::reach;
  int count = 3;          // M
  double duration = 3.0;  // seconds
  double rate = 50.0;     // Hz
  double pos_noise = 0.003;
  double rot_noise = 0.01;
  double force_noise = 0.0;  // keeps the attractor identity exact by default
  double tremor = 0.0;       // shaky-demonstration amplitude
  int branches = 1;
  BranchRule branch_rule = BranchRule::round_robin;
  std::string target_object = "obj";
  int components = 8;  // suggested K for training
  std::vector<std::string> frame_ids = {"global", "robot", "obj"};
  bool force = false;  // wrench traces present
};

struct Demonstration {
  std::vector<double> t;
  std::vector<Pose> ee;
  std::vector<Vec6> velocity, acceleration, wrench;
  FrameSet frames;  // static task parameters of this demo
  SystemState initial_state, final_state;
  int branch = 0;
};

// Named fixtures mirroring the skill-configuration table (demo count, length,
// component count, task-parameter choice), plus generic aliases.
struct Preset {
  std::string name;
  DemoSpec demo;
  SceneSpec scene;
};
Preset preset(const std::string& name);
std::vector<std::string> preset_names();

std::vector<Demonstration> generate_demos(const SceneSpec& scene, const DemoSpec& spec);

// Generator stiffness/damping used for force archetypes; demos satisfy the
// attractor equation exactly for this pair when force_noise is zero.
SpdMatrix generator_stiffness();
SpdMatrix generator_damping();

struct Tolerances {
  double position = 0.002;  // m
  double rotation = 0.15;   // rad
  double force_cap = 60.0;  // N (and N m on the torque block)
};

struct SuccessReport {
  bool success = false;
  double position_error = 0;
  double rotation_error = 0;
  double max_force = 0;
  double position_margin = 0;  // tolerance minus error
  double rotation_margin = 0;
  double force_margin = 0;
  double failure_time = -1;
  std::string detail;
};

SuccessReport evaluate_execution(const std::vector<Pose>& ee, const std::vector<Vec6>& wrench,
                                 const Pose& goal, const Tolerances& tol, double dt);

// ---------------------------------------------------------------------------
// Task-space insertion harness for skill refinement: a 6-D mass-spring-damper
// end-effector descending into a chamfered hole with penalty contact. The
// model's belief of the hole may be offset from the true pose; interaction
// forces grow with misalignment and stiffness.
struct InsertionScenario {
  Pose hole_pose;             // true hole pose (z axis down the bore)
  Vec3 belief_offset = Vec3::Zero();  // model belief error, world frame
  double clearance = 0.0015;  // m
  double depth = 0.02;        // m below the surface
  double env_stiffness = 8000.0;
  double dt = 2e-3;
  int steps = 700;
  double force_cap = 80.0;
  double success_tol = 0.004;
};

struct InsertionOutcome {
  double mean_force = 0;
  double final_error = 0;
  bool success = false;
};

InsertionOutcome simulate_insertion(const InsertionScenario& sc, const Pose& attractor_mean,
                                    const SpdMatrix& stiffness_trans,
                                    const SpdMatrix& stiffness_rot);

}  // namespace skf
