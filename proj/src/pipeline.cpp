#include "skillforge/pipeline.hpp"

#include <filesystem>

#include "skillforge/gabo.hpp"
#include "skillforge/lqt.hpp"

namespace skf {

namespace fs = std::filesystem;

GenerateResult run_generate(const GenerateOptions& opts) {
  Preset p = preset(opts.preset_name);
  p.scene.seed = opts.seed;
  if (opts.count_override > 0) p.demo.count = opts.count_override;
  fs::create_directories(opts.out_dir);

  const auto demos = generate_demos(p.scene, p.demo);
  GenerateResult out;
  out.suggested_components = p.demo.components;
  for (size_t m = 0; m < demos.size(); ++m) {
    const std::string path =
        (fs::path(opts.out_dir) / (opts.preset_name + "_demo_" + std::to_string(m) + ".jsonl"))
            .string();
    save_demo_jsonl(demos[m], path);
    out.demo_files.push_back(path);
  }

  // a fresh scene draw for planning/execution plus its ground-truth goal
  SceneSpec eval_scene = p.scene;
  eval_scene.seed = opts.seed + 1;
  DemoSpec eval_demo = p.demo;
  eval_demo.count = 1;
  eval_demo.pos_noise = 0;
  eval_demo.rot_noise = 0;
  eval_demo.tremor = 0;
  const auto eval = generate_demos(eval_scene, eval_demo);
  out.scene_file = (fs::path(opts.out_dir) / "scene.json").string();
  out.goal_file = (fs::path(opts.out_dir) / "goal.json").string();
  save_state_json(eval[0].initial_state, out.scene_file);
  SystemState goal = eval[0].final_state;
  save_state_json(goal, out.goal_file);
  return out;
}

namespace {

std::vector<std::string> frame_ids_of(const Demonstration& demo) {
  std::vector<std::string> ids;
  for (const auto& f : demo.frames) ids.push_back(f.id);
  return ids;
}

}  // namespace

SkillBundle train_skill(const std::vector<Demonstration>& demos, const TrainOptions& opts) {
  require(demos.size() >= 2, "training needs at least two demonstrations");
  std::vector<std::string> frame_ids = opts.frame_ids;
  if (frame_ids.empty()) frame_ids = frame_ids_of(demos.front());

  std::vector<std::vector<Pose>> trajs;
  std::vector<FrameSet> frames;
  for (const auto& d : demos) {
    frames.push_back(d.frames);
  }

  std::vector<ForceDemo> force_demos;
  std::vector<std::vector<Pose>> attractor_trajs;
  if (opts.force) {
    const SpdMatrix k_rho = default_stiffness();
    const SpdMatrix k_nu = critical_damping(k_rho);
    for (const auto& d : demos) {
      require(!d.wrench.empty(), "--force training requires wrench data in the demos");
      require(d.velocity.size() == d.ee.size() && d.acceleration.size() == d.ee.size(),
              "--force training requires twist and acceleration channels");
      ForceDemo fd;
      for (size_t i = 0; i < d.ee.size(); ++i) {
        fd.push_back(ForceDemoStep{d.ee[i], d.velocity[i], d.acceleration[i], d.wrench[i]});
      }
      force_demos.push_back(fd);
      attractor_trajs.push_back(compute_attractor(fd, k_rho, k_nu));
    }
    trajs = attractor_trajs;  // the skill model encodes the attractor
  } else {
    for (const auto& d : demos) trajs.push_back(d.ee);
  }

  const TpData<PoseManifold> data = project_demos(trajs, frames, frame_ids);
  const auto em = em_fit<PoseManifold>(data, opts.components, opts.seed);
  TpHsmm model = fit_hsmm<PoseManifold>(em.model, data, em.responsibilities);

  // condition models learned on the raw end-effector trajectories
  std::vector<DemoView> views;
  for (const auto& d : demos) {
    views.push_back(DemoView{d.ee, d.initial_state, d.final_state});
  }
  std::vector<std::string> cond_frames = frame_ids;
  if (std::find(cond_frames.begin(), cond_frames.end(), "global") == cond_frames.end()) {
    cond_frames.push_back("global");  // the shared frame for stitching
  }
  const ConditionModel cond = learn_condition_model(model, views, data, em.responsibilities,
                                                    cond_frames, cond_frames);

  SkillBundle bundle;
  bundle.id = opts.skill_id;
  bundle.archetype = opts.archetype;
  bundle.skill.id = opts.skill_id;
  bundle.skill.hsmm = std::move(model);
  bundle.skill.cond = cond;

  if (opts.force) {
    const SpdMatrix k_nu = critical_damping(default_stiffness());
    bundle.stiffness = optimize_stiffness(force_demos, frames, bundle.skill.hsmm,
                                          em.responsibilities, data, k_nu);
  }
  return bundle;
}

SkillBundle run_train(const std::vector<std::string>& demo_files, const TrainOptions& opts,
                      const std::string& out_bundle) {
  require(demo_files.size() >= 2, "training needs at least two demo files");
  std::vector<Demonstration> demos;
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (const auto& f : demo_files) {
    demos.push_back(load_demo_jsonl(f));
    hash ^= file_hash(f);
  }
  hash = fnv1a(&opts.components, sizeof(opts.components), hash);
  hash = fnv1a(&opts.seed, sizeof(opts.seed), hash);

  SkillBundle bundle = train_skill(demos, opts);
  bundle.training_hash = hash;
  save_bundle(bundle, out_bundle);
  return bundle;
}

PlanFile run_compose_plan(const std::vector<std::string>& bundle_files,
                          const std::string& scene_file, const std::string& goal_file,
                          const ComposePlanOptions& opts, const std::string& out_plan) {
  require(!bundle_files.empty(), "compose needs at least one bundle");
  std::vector<SkillModel> skills;
  for (const auto& f : bundle_files) skills.push_back(load_bundle(f).skill);

  const SystemState scene = load_state_json(scene_file);
  const SystemState goal = load_state_json(goal_file);
  // every referenced frame must be resolvable in the scene
  for (const auto& s : skills) {
    (void)frames_from_state(s.hsmm.gmm.frame_ids, scene);
  }

  ComposeOptions copts;
  copts.prune_threshold = opts.prune_threshold;
  const TaskModel task = compose_sequence(skills, copts);
  const int horizon = opts.horizon > 0 ? opts.horizon : default_horizon(task);
  PlanFile out;
  out.bundle_paths = bundle_files;
  out.scene = scene;
  out.goal = goal;
  out.horizon = horizon;
  out.plan = plan(task, scene, goal, horizon);
  save_plan(out, out_plan);
  return out;
}

ExecuteResult run_execute(const std::string& plan_file, const std::string& scene_file,
                          const ExecuteOptions& opts, const std::string& out_trace_csv,
                          const std::string& out_report_json) {
  const PlanFile pf = load_plan(plan_file);
  const SystemState observed = load_state_json(scene_file);

  std::vector<SkillBundle> bundles;
  std::vector<SkillModel> skills;
  for (const auto& b : pf.bundle_paths) {
    bundles.push_back(load_bundle(b));
    skills.push_back(bundles.back().skill);
  }
  const TaskModel task = compose_sequence(skills);

  const SerialArm arm = make_serial7();
  SimulationConfig sim;
  sim.dt = opts.dt;
  sim.ref_dt = opts.lqt_dt;
  VecX q_seed(7);
  q_seed << 0.3, -0.4, 0.5, -1.2, 0.4, 1.0, 0.2;
  sim.q0 = arm.solve_ik(RigidTransform::from_pose(observed.ee), q_seed);
  VecX kv(6);
  kv << 600, 600, 600, 60, 60, 60;
  sim.gains.stiffness = SpdMatrix::diagonal(kv);
  sim.gains.operational_space_inertia = true;

  SimTrace full;
  SystemState current = observed;
  current.ee = arm.forward_kinematics(sim.q0).to_pose();
  double t_offset = 0;
  VecX q = sim.q0;
  for (size_t n = 0; n < pf.plan.per_skill.size(); ++n) {
    if (pf.plan.per_skill[n].states.empty()) continue;
    const auto refs = update_online(task, pf.plan, current, static_cast<int>(n));

    LqtProblem prob;
    for (const auto& g : refs) {
      Eigen::LLT<MatX> llt(g.covariance);
      require(llt.info() == Eigen::Success, "reference covariance not SPD");
      prob.references.push_back({g.mean, llt.solve(MatX::Identity(6, 6))});
    }
    prob.control_cost = opts.control_cost * MatX::Identity(6, 6);
    prob.dt = opts.lqt_dt;
    prob.start = current.ee;
    const PoseTrajectory traj = solve_lqt<PoseManifold>(prob);
    const auto se3_refs = to_se3_trajectory(traj);

    // force skills track compliantly with their learned final stiffness
    SimulationConfig cfg = sim;
    cfg.q0 = q;
    if (bundles[n].stiffness) {
      const int final_comp = skills[n].hsmm.final_states.front();
      cfg.gains.stiffness = bundles[n].stiffness->stiffness[final_comp];
      cfg.gains.operational_space_inertia = true;
    }
    const int steps = static_cast<int>(se3_refs.size() * opts.lqt_dt / opts.dt);
    SimTrace trace = simulate_closed_loop(arm, cfg, se3_refs, nullptr, steps);
    for (size_t k = 0; k < trace.t.size(); ++k) {
      full.t.push_back(trace.t[k] + t_offset);
      full.ee.push_back(trace.ee[k]);
      full.twist.push_back(trace.twist[k]);
      full.wrench.push_back(trace.wrench[k]);
      full.torque.push_back(trace.torque[k]);
      full.q.push_back(trace.q[k]);
    }
    full.truncated = trace.truncated;
    full.status = trace.status;
    if (!trace.q.empty()) q = trace.q.back();
    t_offset += trace.t.empty() ? 0 : trace.t.back() + opts.dt;
    current.ee = arm.forward_kinematics(q).to_pose();
    if (trace.truncated) break;
  }

  // Evaluation goal: what the task predicts for the observed scene. A stale
  // plan whose branch no longer matches the scene fails here by design;
  // replanning is an explicit compose-plan call.
  SystemState eval_state = observed;
  eval_state.ee = arm.forward_kinematics(sim.q0).to_pose();
  const TaskPlan fresh = plan(task, eval_state, pf.goal, pf.horizon);
  const Pose goal_pose = fresh.per_skill.back().references.back().mean;

  ExecuteResult result;
  result.trace = std::move(full);
  result.evaluated_goal = goal_pose;
  result.report = evaluate_execution(result.trace.ee, result.trace.wrench, goal_pose,
                                     opts.tolerances, opts.dt);
  if (result.trace.truncated) {
    result.report.success = false;
    result.report.detail = result.trace.status;
  }
  if (!out_trace_csv.empty()) save_trace_csv(result.trace, out_trace_csv);
  if (!out_report_json.empty()) save_report_json(result.report, out_report_json);
  if (result.trace.truncated) {
    throw PlanningError("execution truncated: " + result.trace.status);
  }
  return result;
}

EstimateResult run_identify(const IdentifyOptions& opts, const std::string& out_params_json) {
  PlanarRegressor reg({0.4, 0.35, 0.25});
  BarycentricParams truth;
  {
    const SerialArm arm = make_planar3();
    for (const auto& l : arm.links()) truth.links.push_back(l);
    truth.friction = {JointFriction{0.4, 0.3, 0.25}, JointFriction{0.5, 0.35, 0.3},
                      JointFriction{0.6, 0.4, 0.35}};
  }

  std::vector<IdSample> data;
  if (!opts.data_csv.empty()) {
    const SimTrace trace = load_trace_csv(opts.data_csv);
    require(trace.t.size() >= 5, "trace too short for identification");
    const double dt = trace.t[1] - trace.t[0];
    for (size_t i = 2; i + 2 < trace.t.size(); ++i) {
      IdSample s;
      s.q = trace.q[i];
      s.qd = (trace.q[i + 1] - trace.q[i - 1]) / (2 * dt);
      s.qdd = (trace.q[i + 1] - 2 * trace.q[i] + trace.q[i - 1]) / (dt * dt);
      s.tau = trace.torque[i];
      data.push_back(s);
    }
  } else {
    JointLimits lim;
    lim.q_lo = VecX::Constant(3, -2.4);
    lim.q_hi = VecX::Constant(3, 2.4);
    lim.qd_max = VecX::Constant(3, 3.0);
    lim.qdd_max = VecX::Constant(3, 12.0);
    lim.qddd_max = VecX::Constant(3, 80.0);
    const HarmonicTrajectory traj =
        design_excitation(reg, lim, opts.omega_b, opts.harmonics, opts.seed);
    if (!opts.excitation_out.empty()) save_excitation_json(traj, opts.excitation_out);

    Rng rng(opts.seed + 17);
    const VecX psi = reg.pack(truth);
    VecX q, qd, qdd, qddd;
    std::vector<VecX> taus;
    for (int k = 0; k < opts.samples; ++k) {
      const double t = traj.period() * k / opts.samples;
      traj.eval(t, q, qd, qdd, qddd);
      IdSample s;
      s.q = q;
      s.qd = qd;
      s.qdd = qdd;
      s.tau = reg.full(q, qd, qdd) * psi;
      data.push_back(s);
      taus.push_back(data.back().tau);
    }
    if (opts.noise > 0) {
      VecX rms = VecX::Zero(3);
      for (const auto& t : taus) rms += t.cwiseAbs2();
      rms = (rms / static_cast<double>(taus.size())).cwiseSqrt();
      for (auto& s : data) {
        for (int i = 0; i < 3; ++i) s.tau[i] += opts.noise * rms[i] * rng.normal();
      }
    }
  }

  BarycentricParams prior = truth;
  for (auto& l : prior.links) l.mass *= 1.1;  // deliberately offset prior
  const EstimateResult result = estimate_params(reg, data, prior);
  if (!out_params_json.empty()) save_params_json(result, out_params_json);
  return result;
}

RigidTransform run_pose(const std::string& keypoints_jsonl, const std::string& intrinsics_json,
                        const std::string& model_json, const PoseOptions& opts,
                        const std::string& out_pose_json) {
  const auto obs = load_keypoints_jsonl(keypoints_jsonl);
  const auto intr = load_intrinsics_json(intrinsics_json);
  auto [object_id, cloud] = load_annotated_model(model_json);
  const auto kept = filter_by_confidence(obs, opts.confidence_floor);
  std::vector<std::pair<int, Vec3>> points;
  for (const auto& o : kept) {
    if (o.object_id != object_id) continue;
    points.emplace_back(o.keypoint_id, unproject(o, intr));
  }
  const RigidTransform pose = solve_pose(cloud, points);
  if (!out_pose_json.empty()) save_pose_json(object_id, pose, out_pose_json);
  return pose;
}

RefineResult run_refine(const std::string& bundle_file, const RefineOptions& opts,
                        const std::string& out_bundle, const std::string& out_trace_csv) {
  SkillBundle bundle = load_bundle(bundle_file);
  RefineResult result;

  if (opts.budget <= 0) {
    // untouched copy
    save_bundle(bundle, out_bundle);
    result.bundle = std::move(bundle);
    return result;
  }

  require(bundle.stiffness.has_value(),
          "refinement expects a force-based skill with a stiffness profile");
  SystemState scene;
  if (!opts.scene_file.empty()) {
    scene = load_state_json(opts.scene_file);
  } else {
    scene.ee = Pose::identity();
  }

  SkillModel& skill = bundle.skill;
  const int final_comp = skill.hsmm.final_states.front();
  FrameSet frames;
  for (const auto& id : skill.hsmm.gmm.frame_ids) {
    frames.push_back(id == "global" ? Frame::identity()
                                    : Frame::from_pose(id, scene.entity(id)));
  }
  const PoseGaussian resolved = skill.hsmm.gmm.global_component(final_comp, frames);
  const Pose mu0 = resolved.mean;
  const SpdMatrix k0_trans(
      MatX(bundle.stiffness->stiffness[final_comp].m().topLeftCorner(3, 3)));
  const SpdMatrix k0_rot(
      MatX(bundle.stiffness->stiffness[final_comp].m().bottomRightCorner(3, 3)));

  InsertionScenario sc;
  sc.hole_pose = mu0;
  sc.belief_offset = opts.belief_offset;

  SearchDomain domain;
  EuclideanFactor pos;
  pos.lo = VecX(3);
  pos.hi = VecX(3);
  for (int i = 0; i < 3; ++i) {
    pos.lo[i] = mu0.position[i] - opts.position_range;
    pos.hi[i] = mu0.position[i] + opts.position_range;
  }
  domain.factors.push_back(pos);
  QuaternionFactor qf;
  qf.center = mu0.orientation;
  qf.max_angle = opts.orientation_range;
  domain.factors.push_back(qf);
  SpdFactor sf;
  sf.center = k0_trans;
  sf.max_log_ratio = opts.stiffness_log_range;
  domain.factors.push_back(sf);

  auto unpack_candidate = [&](const DomainPoint& p) {
    Pose mean;
    mean.position = Vec3(p.blocks[0]);
    mean.orientation = quaternion_of(p, 1);
    return std::make_pair(mean, spd_of(domain, p, 2));
  };
  BoObjective objective = [&](const DomainPoint& p) {
    const auto [mean, k_trans] = unpack_candidate(p);
    const InsertionOutcome oc = simulate_insertion(sc, mean, k_trans, k0_rot);
    const double value = -(opts.force_weight * oc.mean_force +
                           opts.pose_weight * 1e4 * oc.final_error * oc.final_error);
    return std::make_pair(value, oc.success);
  };

  DomainPoint initial;
  initial.blocks = {VecX(mu0.position), mu0.orientation.canonical().coeffs_wxyz(),
                    encode_spd(k0_trans)};
  result.initial_outcome = simulate_insertion(sc, mu0, k0_trans, k0_rot);
  result.initial_objective = objective(initial).first;

  const BoResult bo = bo_maximize(domain, objective, {initial}, opts.budget, opts.seed);
  result.best_objective = bo.best_value;
  const auto [best_mean, best_k] = unpack_candidate(bo.best);
  result.refined_outcome = simulate_insertion(sc, best_mean, best_k, k0_rot);

  // write the refined parameters back into the model: per-frame local means
  // are re-anchored so the resolved product mean equals the refined mean.
  for (size_t p = 0; p < frames.size(); ++p) {
    skill.hsmm.gmm.components[final_comp][p].mean = frames[p].unapply(best_mean);
  }
  MatX k_new = bundle.stiffness->stiffness[final_comp].m();
  k_new.topLeftCorner(3, 3) = best_k.m();
  bundle.stiffness->stiffness[final_comp] = SpdMatrix::project(k_new, 1e-6);

  if (!out_trace_csv.empty()) {
    std::vector<BoTraceRowFlat> rows;
    for (const auto& r : bo.trace) {
      VecX flat(r.candidate.blocks[0].size() + r.candidate.blocks[1].size() +
                r.candidate.blocks[2].size());
      flat << r.candidate.blocks[0], r.candidate.blocks[1], r.candidate.blocks[2];
      rows.push_back(BoTraceRowFlat{r.iteration, flat, r.objective, r.success, r.incumbent});
    }
    save_bo_trace_csv(rows, out_trace_csv);
  }
  save_bundle(bundle, out_bundle);
  result.bundle = std::move(bundle);
  return result;
}

}  // namespace skf
