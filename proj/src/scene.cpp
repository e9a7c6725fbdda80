#include "skillforge/scene.hpp"

#include <map>

namespace skf {

Archetype archetype_from_string(const std::string& s) {
  if (s == "reach") return Archetype::reach;
  if (s == "press") return Archetype::press;
  if (s == "insert") return Archetype::insert;
  if (s == "slide") return Archetype::slide;
  if (s == "reorient") return Archetype::reorient;
  throw ValidationError("unknown archetype '" + s + "'");
}

std::string to_string(Archetype a) {
  switch (a) {
    case Archetype::reach: return "reach";
    case Archetype::press: return "press";
    case Archetype::insert: return "insert";
    case Archetype::slide: return "slide";
    case Archetype::reorient: return "reorient";
  }
  return "reach";
}

SpdMatrix generator_stiffness() { return default_stiffness(400.0, 30.0); }
SpdMatrix generator_damping() { return critical_damping(generator_stiffness()); }

namespace {

double minjerk(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return 10 * s * s * s - 15 * s * s * s * s + 6 * s * s * s * s * s;
}

// Piecewise waypoint path: each leg interpolates a geodesic with a min-jerk
// time profile, then dwells.
struct Leg {
  Pose target;
  double travel_frac;  // of total duration
  double dwell_frac;
  Vec6 attractor_offset = Vec6::Zero();  // force archetypes: Log_x(y) during dwell
};

struct PathSpec {
  Pose start;
  std::vector<Leg> legs;
};

std::vector<Pose> sample_path(const PathSpec& path, int steps) {
  double total = 0;
  for (const auto& l : path.legs) total += l.travel_frac + l.dwell_frac;
  std::vector<Pose> out;
  out.reserve(steps);
  Pose from = path.start;
  size_t leg = 0;
  double leg_start = 0;
  for (int i = 0; i < steps; ++i) {
    const double u = total * i / (steps - 1);
    while (leg < path.legs.size() &&
           u > leg_start + path.legs[leg].travel_frac + path.legs[leg].dwell_frac + 1e-12) {
      leg_start += path.legs[leg].travel_frac + path.legs[leg].dwell_frac;
      from = path.legs[leg].target;
      ++leg;
    }
    if (leg >= path.legs.size()) {
      out.push_back(path.legs.back().target);
      continue;
    }
    const auto& l = path.legs[leg];
    const double local = u - leg_start;
    const double s = l.travel_frac > 0 ? minjerk(local / l.travel_frac) : 1.0;
    const VecX delta = r3s3::log(from, l.target);
    out.push_back(r3s3::exp(from, s * delta));
  }
  return out;
}

// attractor offset profile aligned with the path legs (per step)
std::vector<Vec6> sample_offsets(const PathSpec& path, int steps) {
  double total = 0;
  for (const auto& l : path.legs) total += l.travel_frac + l.dwell_frac;
  std::vector<Vec6> out(steps, Vec6::Zero());
  size_t leg = 0;
  double leg_start = 0;
  for (int i = 0; i < steps; ++i) {
    const double u = total * i / (steps - 1);
    while (leg < path.legs.size() &&
           u > leg_start + path.legs[leg].travel_frac + path.legs[leg].dwell_frac + 1e-12) {
      leg_start += path.legs[leg].travel_frac + path.legs[leg].dwell_frac;
      ++leg;
    }
    if (leg >= path.legs.size()) {
      out[i] = path.legs.back().attractor_offset;
      continue;
    }
    const auto& l = path.legs[leg];
    const double local = u - leg_start;
    if (local > l.travel_frac) {
      out[i] = l.attractor_offset;  // active while dwelling
    }
  }
  return out;
}

Pose offset_pose(const Pose& base, double dx, double dy, double dz, double yaw = 0) {
  Pose p = base;
  p.position += Vec3(dx, dy, dz);
  p.orientation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), yaw) * p.orientation;
  return p;
}

PathSpec build_path(Archetype a, const Pose& start, const Pose& obj, int branch, int branches) {
  PathSpec path;
  path.start = start;
  const double yaw = branches > 1 ? (branch - 0.5 * (branches - 1)) * 0.9 : 0.0;
  switch (a) {
    case Archetype::reach: {
      const Pose pregrasp = offset_pose(obj, 0, 0, 0.08, yaw);
      const Pose grasp = offset_pose(obj, 0, 0, 0.0, yaw);
      path.legs = {{pregrasp, 0.45, 0.05}, {grasp, 0.3, 0.2}};
      break;
    }
    case Archetype::press: {
      // approach, three press plateaus with transitions, retreat
      const double press_depth = -0.004;
      Vec6 press_off = Vec6::Zero();
      press_off[2] = -0.02;  // attractor held below the surface while pressing
      const Pose above1 = offset_pose(obj, -0.03, 0, 0.02);
      const Pose pin1 = offset_pose(obj, -0.03, 0, press_depth);
      const Pose above2 = offset_pose(obj, 0.0, 0.02, 0.02);
      const Pose pin2 = offset_pose(obj, 0.0, 0.02, press_depth);
      const Pose above3 = offset_pose(obj, 0.03, -0.01, 0.02);
      const Pose pin3 = offset_pose(obj, 0.03, -0.01, press_depth);
      const Pose retreat = offset_pose(obj, 0, 0, 0.1);
      path.legs = {{above1, 0.12, 0.0},          {pin1, 0.05, 0.12, press_off},
                   {above2, 0.05, 0.0},          {pin2, 0.05, 0.12, press_off},
                   {above3, 0.05, 0.0},          {pin3, 0.05, 0.12, press_off},
                   {retreat, 0.12, 0.1}};
      break;
    }
    case Archetype::insert: {
      Vec6 push_off = Vec6::Zero();
      push_off[2] = -0.03;
      const Pose above = offset_pose(obj, 0, 0, 0.06, yaw);
      const Pose contact = offset_pose(obj, 0, 0, 0.005, yaw);
      const Pose seated = offset_pose(obj, 0, 0, -0.015, yaw);
      path.legs = {{above, 0.3, 0.05}, {contact, 0.2, 0.1}, {seated, 0.15, 0.2, push_off}};
      break;
    }
    case Archetype::slide: {
      Vec6 twist_off = Vec6::Zero();
      twist_off[5] = -0.15;  // torque about z while twisting
      const Pose attach = offset_pose(obj, 0, 0, 0.03);
      const Pose slid = offset_pose(obj, 0.05, 0, 0.005);
      const Pose twisted = offset_pose(obj, 0.05, 0, 0.0, 0.8);
      Vec6 push_off = Vec6::Zero();
      push_off[2] = -0.02;
      path.legs = {
          {attach, 0.25, 0.05}, {slid, 0.25, 0.1}, {twisted, 0.15, 0.1, twist_off},
          {twisted, 0.0, 0.1, push_off}};
      break;
    }
    case Archetype::reorient: {
      const Pose grasp = offset_pose(obj, 0, 0, 0.0, yaw);
      const Pose lifted = offset_pose(obj, 0, 0, 0.12, yaw);
      Pose turned = lifted;
      turned.orientation =
          UnitQuaternion::from_axis_angle(Vec3::UnitY(), M_PI / 2) * lifted.orientation;
      Pose placed = offset_pose(obj, 0.06, 0, 0.01);
      placed.orientation = turned.orientation;
      path.legs = {{grasp, 0.25, 0.1}, {lifted, 0.15, 0.05}, {turned, 0.2, 0.1}, {placed, 0.15, 0.15}};
      break;
    }
  }
  return path;
}

}  // namespace

std::vector<Demonstration> generate_demos(const SceneSpec& scene, const DemoSpec& spec) {
  require(spec.count >= 1, "demo count must be at least one");
  require(spec.rate > 0 && spec.duration > 0, "invalid demo timing");
  Rng master(scene.seed);
  std::vector<Demonstration> demos;
  const int steps = std::max(8, static_cast<int>(std::lround(spec.duration * spec.rate)));
  const double dt = 1.0 / spec.rate;
  const SpdMatrix k_rho = generator_stiffness();
  const SpdMatrix k_nu = generator_damping();

  for (int m = 0; m < spec.count; ++m) {
    Rng rng = master.fork(m);
    Demonstration demo;

    // sample the scene
    std::map<std::string, Pose> objects;
    for (const auto& os : scene.objects) {
      Pose p = os.nominal;
      for (int a = 0; a < 3; ++a) {
        p.position[a] += os.position_range[a] * rng.uniform(-1, 1);
      }
      p.orientation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(),
                                                      os.yaw_range * rng.uniform(-1, 1)) *
                      p.orientation;
      for (int a = 0; a < 3; ++a) {
        require(p.position[a] >= scene.workspace_lo[a] && p.position[a] <= scene.workspace_hi[a],
                "sampled object pose outside the workspace");
      }
      objects[os.id] = p;
    }
    require(objects.count(spec.target_object), "target object missing from the scene");
    const Pose obj = objects[spec.target_object];

    Pose start;
    start.position = Vec3(0.05 * rng.uniform(-1, 1), 0.05 * rng.uniform(-1, 1),
                          0.25 + 0.03 * rng.uniform(-1, 1));
    start.orientation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), 0.1 * rng.uniform(-1, 1));

    int branch = 0;
    if (spec.branches > 1) {
      branch = spec.branch_rule == BranchRule::round_robin
                   ? m % spec.branches
                   : (obj.position.x() > obj.position.y() ? 1 : 0) % spec.branches;
      if (spec.branch_rule == BranchRule::by_object_x) {
        // region split by x position around the nominal
        const double rel = obj.position.x() - scene.objects.front().nominal.position.x();
        const double width = 2.0 * scene.objects.front().position_range.x() /
                             std::max(1, spec.branches);
        branch = std::clamp(static_cast<int>((rel + scene.objects.front().position_range.x()) /
                                             std::max(width, 1e-9)),
                            0, spec.branches - 1);
      }
    }
    demo.branch = branch;

    const PathSpec path = build_path(spec.archetype, start, obj, branch, spec.branches);
    std::vector<Pose> poses = sample_path(path, steps);
    const std::vector<Vec6> offsets = sample_offsets(path, steps);

    // additive noise and optional tremor on the pose path
    const double tremor_phase = rng.uniform(0, 2 * M_PI);
    for (int i = 0; i < steps; ++i) {
      Vec6 n = Vec6::Zero();
      for (int a = 0; a < 3; ++a) n[a] = spec.pos_noise * rng.normal();
      for (int a = 3; a < 6; ++a) n[a] = spec.rot_noise * rng.normal();
      if (spec.tremor > 0) {
        n[0] += spec.tremor * std::sin(2 * M_PI * 4.0 * i * dt + tremor_phase);
        n[2] += spec.tremor * std::sin(2 * M_PI * 5.0 * i * dt + 1.3 * tremor_phase);
      }
      poses[i] = r3s3::exp(poses[i], n);
    }

    // derivatives in tangent coordinates (central differences)
    demo.t.resize(steps);
    demo.ee = poses;
    demo.velocity.assign(steps, Vec6::Zero());
    demo.acceleration.assign(steps, Vec6::Zero());
    for (int i = 0; i < steps; ++i) demo.t[i] = i * dt;
    for (int i = 1; i + 1 < steps; ++i) {
      demo.velocity[i] = Vec6(r3s3::log(poses[i - 1], poses[i + 1]) / (2 * dt));
    }
    for (int i = 1; i + 1 < steps; ++i) {
      demo.acceleration[i] = (demo.velocity[i + 1] - demo.velocity[i - 1]) / (2 * dt);
    }

    if (spec.force) {
      demo.wrench.assign(steps, Vec6::Zero());
      for (int i = 0; i < steps; ++i) {
        const Pose y = r3s3::exp(poses[i], offsets[i]);
        demo.wrench[i] = k_nu.m() * demo.velocity[i] + demo.acceleration[i] -
                         k_rho.m() * r3s3::log(poses[i], y);
        for (int a = 0; a < 6 && spec.force_noise > 0; ++a) {
          demo.wrench[i][a] += spec.force_noise * rng.normal();
        }
      }
    }

    // task parameters: global + robot (start pose) + every object
    demo.frames.push_back(Frame::identity());
    demo.frames.push_back(Frame::from_pose("robot", poses.front()));
    for (const auto& [id, pose] : objects) demo.frames.push_back(Frame::from_pose(id, pose));

    demo.initial_state.ee = poses.front();
    demo.initial_state.objects = objects;
    demo.final_state.ee = poses.back();
    demo.final_state.objects = objects;
    if (spec.archetype == Archetype::reorient) {
      Pose moved = objects.at(spec.target_object);
      moved.position += Vec3(0.06, 0, 0.01);
      moved.orientation = UnitQuaternion::from_axis_angle(Vec3::UnitY(), M_PI / 2) *
                          moved.orientation;
      demo.final_state.objects[spec.target_object] = moved;
    }
    demos.push_back(std::move(demo));
  }
  return demos;
}

Preset preset(const std::string& name) {
  Preset p;
  p.name = name;
  ObjectSpec obj;
  obj.id = "obj";
  obj.nominal.position = Vec3(0.45, 0.1, 0.12);
  p.scene.objects = {obj};

  auto set = [&](Archetype a, int m, double t, int k, bool force,
                 std::vector<std::string> frames) {
    p.demo.archetype = a;
    p.demo.count = m;
    p.demo.duration = t;
    p.demo.components = k;
    p.demo.force = force;
    p.demo.frame_ids = std::move(frames);
  };
  // demo count, duration and component count follow the skill-configuration
  // table; frames: r = robot, g = global, o = object.
  if (name == "grasp_gear") {
    set(Archetype::reach, 3, 1.2, 8, false, {"robot", "obj"});
  } else if (name == "mount_gear") {
    set(Archetype::insert, 3, 4.8, 18, true, {"robot", "global"});
  } else if (name == "pick_shaft") {
    set(Archetype::reach, 3, 1.3, 7, false, {"robot", "obj"});
  } else if (name == "orient_shaft") {
    set(Archetype::reorient, 3, 1.8, 12, false, {"robot", "obj"});
  } else if (name == "insert_shaft") {
    set(Archetype::insert, 2, 5.7, 23, true, {"robot", "global"});
  } else if (name == "pick_peg") {
    set(Archetype::reach, 3, 2.0, 10, false, {"robot", "global"});
  } else if (name == "orient_peg") {
    set(Archetype::reorient, 3, 1.8, 12, false, {"robot", "obj"});
  } else if (name == "slide_peg") {
    set(Archetype::slide, 2, 5.3, 24, true, {"robot", "obj"});
  } else if (name == "press_pcb") {
    set(Archetype::press, 4, 6.0, 22, true, {"robot", "global"});
  } else if (name == "reach") {
    set(Archetype::reach, 4, 3.0, 6, false, {"global", "robot", "obj"});
  } else if (name == "press") {
    set(Archetype::press, 4, 6.0, 10, true, {"global", "robot", "obj"});
  } else {
    throw ValidationError("unknown preset '" + name + "'");
  }
  // frames listed as "obj" resolve against the single scene object; presets
  // that omit the object frame still record object poses for conditions.
  return p;
}

std::vector<std::string> preset_names() {
  return {"grasp_gear", "mount_gear", "pick_shaft", "orient_shaft", "insert_shaft",
          "pick_peg",   "orient_peg", "slide_peg",  "press_pcb",    "reach",
          "press"};
}

SuccessReport evaluate_execution(const std::vector<Pose>& ee, const std::vector<Vec6>& wrench,
                                 const Pose& goal, const Tolerances& tol, double dt) {
  require(!ee.empty(), "empty execution trace");
  SuccessReport rep;
  rep.position_error = (ee.back().position - goal.position).norm();
  rep.rotation_error = s3::distance(ee.back().orientation, goal.orientation);
  rep.max_force = 0;
  for (size_t i = 0; i < wrench.size(); ++i) {
    const double f = wrench[i].norm();
    if (f > rep.max_force) rep.max_force = f;
    if (f > tol.force_cap && rep.failure_time < 0) {
      rep.failure_time = static_cast<double>(i) * dt;
    }
  }
  rep.position_margin = tol.position - rep.position_error;
  rep.rotation_margin = tol.rotation - rep.rotation_error;
  rep.force_margin = tol.force_cap - rep.max_force;
  rep.success =
      rep.position_margin >= 0 && rep.rotation_margin >= 0 && rep.force_margin >= 0;
  if (!rep.success) {
    if (rep.position_margin < 0) rep.detail = "position tolerance exceeded";
    else if (rep.rotation_margin < 0) rep.detail = "rotation tolerance exceeded";
    else rep.detail = "force cap exceeded";
  } else {
    rep.detail = "ok";
  }
  return rep;
}

InsertionOutcome simulate_insertion(const InsertionScenario& sc, const Pose& attractor_mean,
                                    const SpdMatrix& stiffness_trans,
                                    const SpdMatrix& stiffness_rot) {
  // 6x6 stiffness from the blocks, critical damping, unit virtual mass
  MatX k = MatX::Zero(6, 6);
  k.topLeftCorner(3, 3) = stiffness_trans.m();
  k.bottomRightCorner(3, 3) = stiffness_rot.m();
  const SpdMatrix k_full(k);
  const MatX d = 2.0 * k_full.sqrt();

  // the commanded attractor carries the belief error
  Pose target = attractor_mean;
  target.position += sc.belief_offset;

  const RigidTransform hole = RigidTransform::from_pose(sc.hole_pose);
  const RigidTransform hole_inv = hole.inverse();

  Pose x = attractor_mean;
  x.position = hole * Vec3(0, 0, 0.05);  // start above the hole
  Vec6 v = Vec6::Zero();
  double force_acc = 0;
  double max_force = 0;
  int n = 0;
  for (int i = 0; i < sc.steps; ++i) {
    const Vec3 local = hole_inv * x.position;
    Vec6 f_contact = Vec6::Zero();
    const double lateral = std::hypot(local.x(), local.y());
    if (local.z() < 0) {
      if (lateral > sc.clearance) {
        // blocked at the surface next to the bore
        f_contact.head<3>() += hole.rotation() * Vec3(0, 0, -sc.env_stiffness * local.z());
      } else {
        // in the bore: wall reaction keeps the peg centered
        const double wall = lateral - 0.8 * sc.clearance;
        if (wall > 0) {
          const Vec3 dir(-local.x() / std::max(lateral, 1e-12),
                         -local.y() / std::max(lateral, 1e-12), 0);
          f_contact.head<3>() += hole.rotation() * (sc.env_stiffness * wall * dir);
        }
        if (local.z() < -sc.depth) {
          f_contact.head<3>() +=
              hole.rotation() * Vec3(0, 0, -sc.env_stiffness * (local.z() + sc.depth));
        }
      }
    }
    const Vec6 acc = k_full.m() * r3s3::log(x, target) - d * v + f_contact;
    v += sc.dt * acc;
    const Pose x_next = r3s3::exp(x, sc.dt * v);
    v = r3s3::transport(x, x_next) * v;
    x = x_next;
    force_acc += f_contact.norm();
    max_force = std::max(max_force, f_contact.norm());
    ++n;
  }
  InsertionOutcome out;
  out.mean_force = force_acc / std::max(1, n);
  const Vec3 local_final = hole_inv * x.position;
  out.final_error = (local_final - Vec3(0, 0, -sc.depth)).norm();
  out.success = out.final_error < sc.success_tol && max_force < sc.force_cap;
  return out;
}

}  // namespace skf
