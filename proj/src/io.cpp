#include "skillforge/io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace skf {

using Json = nlohmann::ordered_json;

namespace {

Json to_json(const Pose& p) {
  const UnitQuaternion q = p.orientation.canonical();
  return Json::array(
      {p.position.x(), p.position.y(), p.position.z(), q.w(), q.x(), q.y(), q.z()});
}

Pose pose_from(const Json& j) {
  require(j.is_array() && j.size() == 7, "pose must be 7 numbers [xyz, wxyz]");
  Pose p;
  p.position = Vec3(j[0], j[1], j[2]);
  p.orientation = UnitQuaternion(j[3], j[4], j[5], j[6]);
  return p;
}

Json to_json(const MatX& m) {
  Json data = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    for (int c = 0; c < m.cols(); ++c) data.push_back(m(i, c));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatX mat_from(const Json& j) {
  const int rows = j.at("rows"), cols = j.at("cols");
  const auto& data = j.at("data");
  require(static_cast<int>(data.size()) == rows * cols, "matrix payload size mismatch");
  MatX m(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) m(i, c) = data[k++];
  }
  return m;
}

Json to_json(const VecX& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

VecX vec_from(const Json& j) {
  VecX v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = j[i];
  return v;
}

Json to_json(const PoseGaussian& g) {
  return Json{{"mean", to_json(g.mean)}, {"covariance", to_json(g.covariance)}};
}

PoseGaussian gaussian_from(const Json& j) {
  return PoseGaussian{pose_from(j.at("mean")), mat_from(j.at("covariance"))};
}

Json to_json(const FrameGaussianSet& s) {
  Json out = Json::array();
  for (size_t i = 0; i < s.frame_ids.size(); ++i) {
    out.push_back(Json{{"frame", s.frame_ids[i]}, {"gaussian", to_json(s.gaussians[i])}});
  }
  return out;
}

FrameGaussianSet set_from(const Json& j) {
  FrameGaussianSet s;
  for (const auto& e : j) {
    s.frame_ids.push_back(e.at("frame"));
    s.gaussians.push_back(gaussian_from(e.at("gaussian")));
  }
  return s;
}

Json to_json(const TpHsmm& m) {
  Json comps = Json::array();
  for (const auto& row : m.gmm.components) {
    Json per_frame = Json::array();
    for (const auto& g : row) per_frame.push_back(to_json(g));
    comps.push_back(per_frame);
  }
  Json durations = Json::array();
  for (const auto& d : m.durations) {
    durations.push_back(Json{{"mean", d.mean}, {"std", d.std}});
  }
  return Json{{"priors", to_json(m.gmm.priors)},
              {"frames", m.gmm.frame_ids},
              {"components", comps},
              {"transitions", to_json(m.transitions)},
              {"durations", durations},
              {"initial", to_json(m.initial)},
              {"final_states", m.final_states},
              {"final_weight", to_json(m.final_weight)}};
}

TpHsmm hsmm_from(const Json& j) {
  TpHsmm m;
  m.gmm.priors = vec_from(j.at("priors"));
  m.gmm.frame_ids = j.at("frames").get<std::vector<std::string>>();
  for (const auto& row : j.at("components")) {
    std::vector<PoseGaussian> comps;
    for (const auto& g : row) comps.push_back(gaussian_from(g));
    m.gmm.components.push_back(std::move(comps));
  }
  m.transitions = mat_from(j.at("transitions"));
  for (const auto& d : j.at("durations")) {
    m.durations.push_back(DurationModel{d.at("mean"), d.at("std")});
  }
  m.initial = vec_from(j.at("initial"));
  m.final_states = j.at("final_states").get<std::vector<int>>();
  m.final_weight = vec_from(j.at("final_weight"));
  return m;
}

Json to_json(const ConditionModel& c) {
  auto map_to_json = [](const std::map<int, FrameGaussianSet>& m) {
    Json out = Json::array();
    for (const auto& [k, s] : m) out.push_back(Json{{"component", k}, {"set", to_json(s)}});
    return out;
  };
  Json effect = Json::array();
  for (const auto& [k, entities] : c.effect) {
    Json ents = Json::array();
    for (const auto& [id, s] : entities) {
      ents.push_back(Json{{"entity", id}, {"set", to_json(s)}});
    }
    effect.push_back(Json{{"component", k}, {"entities", ents}});
  }
  return Json{{"init_frames", c.init_frame_ids},
              {"final_frames", c.final_frame_ids},
              {"precondition", map_to_json(c.precondition)},
              {"final_condition", map_to_json(c.final_condition)},
              {"effect", effect}};
}

ConditionModel cond_from(const Json& j) {
  ConditionModel c;
  c.init_frame_ids = j.at("init_frames").get<std::vector<std::string>>();
  c.final_frame_ids = j.at("final_frames").get<std::vector<std::string>>();
  for (const auto& e : j.at("precondition")) {
    c.precondition[e.at("component")] = set_from(e.at("set"));
  }
  for (const auto& e : j.at("final_condition")) {
    c.final_condition[e.at("component")] = set_from(e.at("set"));
  }
  for (const auto& e : j.at("effect")) {
    for (const auto& ent : e.at("entities")) {
      c.effect[e.at("component")][ent.at("entity")] = set_from(ent.at("set"));
    }
  }
  return c;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), "cannot write '" + path + "'");
  out << text;
  require(out.good(), "write failed for '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_bundle(const SkillBundle& bundle, const std::string& path) {
  bundle.validate();
  Json j{{"format", "skillforge-bundle"},
         {"version", bundle.version},
         {"id", bundle.id},
         {"archetype", bundle.archetype},
         {"model", to_json(bundle.skill.hsmm)},
         {"conditions", to_json(bundle.skill.cond)},
         {"training_hash", bundle.training_hash}};
  if (bundle.stiffness) {
    Json stiff = Json::array();
    for (const auto& k : bundle.stiffness->stiffness) stiff.push_back(to_json(k.m()));
    j["stiffness"] = Json{{"per_component", stiff}, {"damping", to_json(bundle.stiffness->damping.m())}};
  }
  write_file(path, j.dump(1));
}

SkillBundle load_bundle(const std::string& path) {
  const Json j = Json::parse(read_file(path));
  require(j.value("format", "") == "skillforge-bundle", "not a skill bundle: " + path);
  require(j.at("version").get<int>() == 1, "unsupported bundle version");
  SkillBundle b;
  b.version = j.at("version");
  b.id = j.at("id");
  b.archetype = j.value("archetype", "reach");
  b.skill.id = b.id;
  b.skill.hsmm = hsmm_from(j.at("model"));
  b.skill.cond = cond_from(j.at("conditions"));
  b.training_hash = j.at("training_hash");
  if (j.contains("stiffness")) {
    StiffnessProfile p;
    for (const auto& k : j.at("stiffness").at("per_component")) {
      p.stiffness.emplace_back(mat_from(k));
    }
    p.damping = SpdMatrix(mat_from(j.at("stiffness").at("damping")));
    b.stiffness = std::move(p);
  }
  b.validate();
  return b;
}

void save_demo_jsonl(const Demonstration& demo, const std::string& path) {
  std::ostringstream out;
  for (size_t i = 0; i < demo.t.size(); ++i) {
    Json rec{{"t", demo.t[i]}, {"pose", to_json(demo.ee[i])}};
    if (!demo.velocity.empty()) rec["twist"] = to_json(VecX(demo.velocity[i]));
    if (!demo.acceleration.empty()) rec["accel"] = to_json(VecX(demo.acceleration[i]));
    if (!demo.wrench.empty()) rec["wrench"] = to_json(VecX(demo.wrench[i]));
    Json frames = Json::object();
    const auto& objs =
        (i + 1 == demo.t.size()) ? demo.final_state.objects : demo.initial_state.objects;
    for (const auto& [id, pose] : objs) frames[id] = to_json(pose);
    rec["frames"] = frames;
    out << rec.dump() << "\n";
  }
  write_file(path, out.str());
}

Demonstration load_demo_jsonl(const std::string& path) {
  std::istringstream in(read_file(path));
  Demonstration demo;
  std::string line;
  double prev_t = -std::numeric_limits<double>::infinity();
  std::map<std::string, Pose> first_objs, last_objs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Json rec = Json::parse(line);
    const double t = rec.at("t");
    require(t > prev_t, "demo timestamps must be strictly increasing");
    prev_t = t;
    demo.t.push_back(t);
    demo.ee.push_back(pose_from(rec.at("pose")));
    if (rec.contains("twist")) demo.velocity.push_back(Vec6(vec_from(rec.at("twist"))));
    if (rec.contains("accel")) demo.acceleration.push_back(Vec6(vec_from(rec.at("accel"))));
    if (rec.contains("wrench")) demo.wrench.push_back(Vec6(vec_from(rec.at("wrench"))));
    std::map<std::string, Pose> objs;
    for (const auto& [id, pj] : rec.at("frames").items()) objs[id] = pose_from(pj);
    if (first_objs.empty()) first_objs = objs;
    last_objs = objs;
  }
  require(!demo.t.empty(), "demo file is empty: " + path);
  demo.initial_state.ee = demo.ee.front();
  demo.initial_state.objects = first_objs;
  demo.final_state.ee = demo.ee.back();
  demo.final_state.objects = last_objs;
  demo.frames.push_back(Frame::identity());
  demo.frames.push_back(Frame::from_pose("robot", demo.ee.front()));
  for (const auto& [id, pose] : first_objs) demo.frames.push_back(Frame::from_pose(id, pose));
  return demo;
}

void save_state_json(const SystemState& state, const std::string& path) {
  Json objs = Json::object();
  for (const auto& [id, pose] : state.objects) objs[id] = to_json(pose);
  write_file(path, Json{{"ee", to_json(state.ee)}, {"objects", objs}}.dump(1));
}

SystemState load_state_json(const std::string& path) {
  const Json j = Json::parse(read_file(path));
  SystemState s;
  s.ee = pose_from(j.at("ee"));
  if (j.contains("objects")) {
    for (const auto& [id, pj] : j.at("objects").items()) s.objects[id] = pose_from(pj);
  }
  return s;
}

void save_plan(const PlanFile& plan, const std::string& path) {
  Json per_skill = Json::array();
  for (const auto& seq : plan.plan.per_skill) {
    Json refs = Json::array();
    for (const auto& g : seq.references) refs.push_back(to_json(g));
    per_skill.push_back(Json{{"states", seq.states}, {"references", refs}});
  }
  Json j{{"format", "skillforge-plan"},
         {"version", plan.version},
         {"bundles", plan.bundle_paths},
         {"scene",
          Json{{"ee", to_json(plan.scene.ee)},
               {"objects",
                [&] {
                  Json o = Json::object();
                  for (const auto& [id, p] : plan.scene.objects) o[id] = to_json(p);
                  return o;
                }()}}},
         {"goal", to_json(plan.goal.ee)},
         {"horizon", plan.horizon},
         {"states", plan.plan.states},
         {"copy_of_skill", plan.plan.copy_of_skill},
         {"per_skill", per_skill}};
  write_file(path, j.dump(1));
}

PlanFile load_plan(const std::string& path) {
  const Json j = Json::parse(read_file(path));
  require(j.value("format", "") == "skillforge-plan", "not a plan file: " + path);
  PlanFile p;
  p.version = j.at("version");
  p.bundle_paths = j.at("bundles").get<std::vector<std::string>>();
  p.scene.ee = pose_from(j.at("scene").at("ee"));
  for (const auto& [id, pj] : j.at("scene").at("objects").items()) {
    p.scene.objects[id] = pose_from(pj);
  }
  p.goal.ee = pose_from(j.at("goal"));
  p.horizon = j.at("horizon");
  p.plan.states = j.at("states").get<std::vector<int>>();
  p.plan.copy_of_skill = j.at("copy_of_skill").get<std::vector<int>>();
  for (const auto& sj : j.at("per_skill")) {
    StateSequence seq;
    seq.states = sj.at("states").get<std::vector<int>>();
    for (const auto& g : sj.at("references")) seq.references.push_back(gaussian_from(g));
    p.plan.per_skill.push_back(std::move(seq));
  }
  return p;
}

void save_trace_csv(const SimTrace& trace, const std::string& path) {
  std::ostringstream out;
  const int n = trace.torque.empty() ? 0 : static_cast<int>(trace.torque[0].size());
  out << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,fx,fy,fz,tx,ty,tz";
  for (int i = 0; i < n; ++i) out << ",tau" << i;
  for (int i = 0; i < n; ++i) out << ",q" << i;
  out << "\n";
  out.precision(17);
  for (size_t k = 0; k < trace.t.size(); ++k) {
    const UnitQuaternion q = trace.ee[k].orientation.canonical();
    out << trace.t[k] << "," << trace.ee[k].position.x() << "," << trace.ee[k].position.y()
        << "," << trace.ee[k].position.z() << "," << q.w() << "," << q.x() << "," << q.y()
        << "," << q.z();
    for (int i = 0; i < 6; ++i) out << "," << trace.twist[k][i];
    for (int i = 0; i < 6; ++i) out << "," << trace.wrench[k][i];
    for (int i = 0; i < n; ++i) out << "," << trace.torque[k][i];
    for (int i = 0; i < n; ++i) out << "," << trace.q[k][i];
    out << "\n";
  }
  write_file(path, out.str());
}

SimTrace load_trace_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string header;
  require(static_cast<bool>(std::getline(in, header)), "empty trace csv");
  int columns = 1;
  for (char c : header) {
    if (c == ',') ++columns;
  }
  const int n = (columns - 20) / 2;
  require(columns == 20 + 2 * n, "unexpected trace csv layout");
  SimTrace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<double> vals;
    std::string cell;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    require(static_cast<int>(vals.size()) == columns, "short row in trace csv");
    trace.t.push_back(vals[0]);
    Pose p;
    p.position = Vec3(vals[1], vals[2], vals[3]);
    p.orientation = UnitQuaternion(vals[4], vals[5], vals[6], vals[7]);
    trace.ee.push_back(p);
    Vec6 tw, wr;
    for (int i = 0; i < 6; ++i) tw[i] = vals[8 + i];
    for (int i = 0; i < 6; ++i) wr[i] = vals[14 + i];
    trace.twist.push_back(tw);
    trace.wrench.push_back(wr);
    VecX tau(n), q(n);
    for (int i = 0; i < n; ++i) tau[i] = vals[20 + i];
    for (int i = 0; i < n; ++i) q[i] = vals[20 + n + i];
    trace.torque.push_back(tau);
    trace.q.push_back(q);
  }
  return trace;
}

void save_report_json(const SuccessReport& report, const std::string& path) {
  Json j{{"success", report.success},
         {"position_error", report.position_error},
         {"rotation_error", report.rotation_error},
         {"max_force", report.max_force},
         {"position_margin", report.position_margin},
         {"rotation_margin", report.rotation_margin},
         {"force_margin", report.force_margin},
         {"failure_time", report.failure_time},
         {"detail", report.detail}};
  write_file(path, j.dump(1));
}

std::vector<KeypointObservation> load_keypoints_jsonl(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<KeypointObservation> obs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    KeypointObservation o;
    o.object_id = j.at("object_id");
    o.keypoint_id = j.at("keypoint_id");
    o.u = j.at("u");
    o.v = j.at("v");
    o.depth = j.at("depth");
    o.confidence = j.at("confidence");
    obs.push_back(o);
  }
  return obs;
}

CameraIntrinsics load_intrinsics_json(const std::string& path) {
  const Json j = Json::parse(read_file(path));
  CameraIntrinsics intr{j.at("fx"), j.at("fy"), j.at("cx"), j.at("cy")};
  intr.validate();
  return intr;
}

std::pair<std::string, AnnotatedCloud> load_annotated_model(const std::string& path) {
  const Json j = Json::parse(read_file(path));
  std::vector<int> ids;
  const auto& kps = j.at("keypoints");
  MatX pts(static_cast<int>(kps.size()), 3);
  int row = 0;
  for (const auto& kp : kps) {
    ids.push_back(kp.at("id"));
    pts.row(row++) = Vec3(kp.at("x"), kp.at("y"), kp.at("z"));
  }
  return {j.at("object_id"), AnnotatedCloud(ids, pts)};
}

void save_pose_json(const std::string& object_id, const RigidTransform& pose,
                    const std::string& path) {
  write_file(path, Json{{"object_id", object_id}, {"pose", to_json(pose.to_pose())}}.dump(1));
}

void save_excitation_json(const HarmonicTrajectory& traj, const std::string& path) {
  write_file(path, Json{{"omega_b", traj.omega_b},
                        {"n_h", traj.n_h},
                        {"theta0", to_json(traj.theta0)},
                        {"a", to_json(traj.a)},
                        {"b", to_json(traj.b)}}
                       .dump(1));
}

HarmonicTrajectory load_excitation_json(const std::string& path) {
  const Json j = Json::parse(read_file(path));
  HarmonicTrajectory traj;
  traj.omega_b = j.at("omega_b");
  traj.n_h = j.at("n_h");
  traj.theta0 = vec_from(j.at("theta0"));
  traj.a = mat_from(j.at("a"));
  traj.b = mat_from(j.at("b"));
  return traj;
}

void save_params_json(const EstimateResult& result, const std::string& path) {
  Json links = Json::array();
  for (const auto& l : result.params.links) {
    links.push_back(Json{{"mass", l.mass},
                         {"com", Json::array({l.com.x(), l.com.y(), l.com.z()})},
                         {"inertia_com", to_json(MatX(l.inertia_com))}});
  }
  Json friction = Json::array();
  for (const auto& f : result.params.friction) {
    friction.push_back(Json{{"coulomb_pos", f.coulomb_pos},
                            {"coulomb_neg", f.coulomb_neg},
                            {"viscous", f.viscous}});
  }
  write_file(path, Json{{"links", links},
                        {"friction", friction},
                        {"base_estimate", to_json(result.base_estimate)},
                        {"residual", result.residual},
                        {"condition", result.condition},
                        {"condition_warning", result.condition_warning}}
                       .dump(1));
}

void save_bo_trace_csv(const std::vector<BoTraceRowFlat>& rows, const std::string& path) {
  std::ostringstream out;
  const int d = rows.empty() ? 0 : static_cast<int>(rows[0].candidate.size());
  out << "iteration";
  for (int i = 0; i < d; ++i) out << ",x" << i;
  out << ",objective,success,incumbent\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.iteration;
    for (int i = 0; i < d; ++i) out << "," << r.candidate[i];
    out << "," << r.objective << "," << (r.success ? 1 : 0) << "," << r.incumbent << "\n";
  }
  write_file(path, out.str());
}

std::uint64_t file_hash(const std::string& path) {
  const std::string content = read_file(path);
  return fnv1a(content.data(), content.size());
}

}  // namespace skf
