#include "gift/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "gift/rng.hpp"

namespace gift {

namespace {

Json vec(const Vec2& v, int digits = 0) {
  if (digits > 0) return Json::array({round_sig(v.x(), digits), round_sig(v.y(), digits)});
  return Json::array({v.x(), v.y()});
}

Vec2 vec_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Json points(const std::vector<Vec2>& pts, int digits = 0) {
  Json a = Json::array();
  for (const Vec2& p : pts) a.push_back(vec(p, digits));
  return a;
}

std::vector<Vec2> points_from(const Json& j) {
  std::vector<Vec2> out;
  for (const auto& p : j) out.push_back(vec_from(p));
  return out;
}

Json pose(const Pose& p) { return Json::array({p.p.x(), p.p.y(), p.theta}); }

Json material_json(const Material& m) {
  return {{"density", round_sig(m.density, 9)},
          {"restitution", round_sig(m.restitution, 9)},
          {"friction", round_sig(m.friction, 9)}};
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

double round_sig(double x, int digits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return std::strtod(buf, nullptr);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
  if (!out) throw ValidationError("write failed: " + path);
}

Json tool_to_json(const ToolShape& shape) {
  Json parts = Json::array();
  for (const auto& part : shape.parts)
    parts.push_back({{"vertices", points(part.vertices, 9)},
                     {"material", material_json(part.material)},
                     {"label", to_string(part.label)}});
  return {{"tool_id", shape.tool_id},
          {"config", to_string(shape.config)},
          {"parts", parts},
          {"seed", shape.seed},
          {"n_samples", shape.size()}};
}

ToolShape tool_from_json(const Json& j, int n_samples) {
  return guarded("tool", [&] {
    const auto& parts = j.at("parts");
    if (parts.size() != 2) throw ValidationError("tool: exactly two parts required");
    ConvexPart p[2];
    for (int k = 0; k < 2; ++k) {
      p[k].vertices = points_from(parts[k].at("vertices"));
      const auto& m = parts[k].at("material");
      p[k].material = {m.at("density").get<double>(), m.at("restitution").get<double>(),
                       m.at("friction").get<double>()};
      p[k].label = parse_part_label(parts[k].at("label").get<std::string>());
    }
    if (p[0].label == PartLabel::Head) std::swap(p[0], p[1]);
    if (p[0].label != PartLabel::Handle || p[1].label != PartLabel::Head)
      throw ValidationError("tool: needs one handle and one head");
    return build_tool(j.at("tool_id").get<int>(), parse_tool_config(j.at("config").get<std::string>()),
                      j.at("seed").get<std::uint64_t>(), p[0], p[1], j.value("n_samples", n_samples));
  });
}

void write_tools(const std::string& path, const std::vector<ToolShape>& tools) {
  Json a = Json::array();
  for (const auto& t : tools) a.push_back(tool_to_json(t));
  write_text(path, a.dump(1) + "\n");
}

std::vector<ToolShape> read_tools(const std::string& path) {
  const Json j = guarded("tools.json", [&] { return Json::parse(read_text(path)); });
  std::vector<ToolShape> out;
  for (const auto& t : j) out.push_back(tool_from_json(t));
  return out;
}

Json keypoints_to_json(const KeypointSet& K) {
  return {{"tool_id", K.tool_id}, {"M", K.size()}, {"points", points(K.points)}, {"loss_trace", K.loss_trace}};
}

KeypointSet keypoints_from_json(const Json& j) {
  return guarded("keypoints", [&] {
    KeypointSet K;
    K.tool_id = j.at("tool_id").get<int>();
    K.points = points_from(j.at("points"));
    if (j.contains("loss_trace")) K.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    if (j.contains("M") && j.at("M").get<int>() != K.size()) throw ValidationError("keypoints: M mismatch");
    return K;
  });
}

void write_keypoints(const std::string& path, const std::vector<KeypointSet>& sets) {
  Json a = Json::array();
  for (const auto& k : sets) a.push_back(keypoints_to_json(k));
  write_text(path, a.dump(1) + "\n");
}

std::vector<KeypointSet> read_keypoints(const std::string& path) {
  const Json j = guarded("keypoints.json", [&] { return Json::parse(read_text(path)); });
  std::vector<KeypointSet> out;
  for (const auto& k : j) out.push_back(keypoints_from_json(k));
  return out;
}

ToolSet match_keypoints(std::vector<ToolShape> tools, const std::vector<KeypointSet>& sets) {
  std::map<int, const KeypointSet*> by_id;
  for (const auto& k : sets) by_id[k.tool_id] = &k;
  ToolSet ts;
  for (auto& t : tools) {
    const auto it = by_id.find(t.tool_id);
    if (it == by_id.end()) throw ValidationError("no keypoints for tool " + std::to_string(t.tool_id));
    ts.keypoints.push_back(*it->second);
    ts.tools.push_back(std::move(t));
  }
  return ts;
}

Json tuple_to_json(const ExperienceTuple& t) {
  return {{"tool_id", t.tool_id},
          {"keypoints", points(t.keypoints)},
          {"normals", points(t.normals)},
          {"grasp_idx", t.grasp_idx},
          {"inter_idx", t.inter_idx},
          {"reward", t.reward},
          {"grasp_success", t.grasp_success},
          {"task_success", t.task_success},
          {"mode", to_string(t.mode)}};
}

ExperienceTuple tuple_from_json(const Json& j) {
  return guarded("experience", [&] {
    ExperienceTuple t;
    t.tool_id = j.at("tool_id").get<int>();
    t.keypoints = points_from(j.at("keypoints"));
    if (j.contains("normals")) t.normals = points_from(j.at("normals"));
    t.grasp_idx = j.at("grasp_idx").get<int>();
    t.inter_idx = j.at("inter_idx").get<int>();
    t.reward = j.at("reward").get<double>();
    t.grasp_success = j.at("grasp_success").get<bool>();
    t.task_success = j.at("task_success").get<bool>();
    const std::string mode = j.at("mode").get<std::string>();
    if (mode != "train" && mode != "eval") throw ValidationError("experience: bad mode " + mode);
    t.mode = mode == "train" ? Mode::Train : Mode::Eval;
    return t;
  });
}

std::string experience_jsonl(const std::vector<ExperienceTuple>& tuples) {
  std::string out;
  for (const auto& t : tuples) out += tuple_to_json(t).dump() + "\n";
  return out;
}

std::vector<ExperienceTuple> parse_experience(const std::string& text) {
  std::vector<ExperienceTuple> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(tuple_from_json(guarded("experience", [&] { return Json::parse(line); })));
  }
  return out;
}

Json train_config_to_json(const TrainConfig& cfg) {
  return {{"lr", cfg.lr},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"seed", cfg.seed},
          {"loss", to_string(cfg.loss)},
          {"normalize_rewards", cfg.normalize_rewards},
          {"checkpoint_every", cfg.checkpoint_every},
          {"optimizer", {{"name", "adam"}, {"beta1", cfg.beta1}, {"beta2", cfg.beta2}, {"eps", cfg.adam_eps}}}};
}

Json model_to_json(const GraphModel& model, int M, const TrainConfig& cfg, const std::vector<double>& loss_history) {
  Json weights = Json::object();
  for (const auto& b : model.blocks()) {
    Json rows = Json::array();
    for (int r = 0; r < b.rows; ++r) {
      Json row = Json::array();
      for (int c = 0; c < b.cols; ++c) row.push_back(model.theta(b.offset + static_cast<Eigen::Index>(c) * b.rows + r));
      rows.push_back(row);
    }
    weights[b.name] = rows;
  }
  return {{"arch",
           {{"L", model.rounds}, {"h", model.hidden}, {"M", M}, {"in_dim", model.in_dim}, {"hash", model.arch_hash()}}},
          {"weights", weights},
          {"train_config", train_config_to_json(cfg)},
          {"loss_history", loss_history}};
}

GraphModel model_from_json(const Json& j) {
  return guarded("model", [&] {
    const auto& arch = j.at("arch");
    GraphModel m;
    m.rounds = arch.at("L").get<int>();
    m.hidden = arch.at("h").get<int>();
    m.in_dim = arch.value("in_dim", 5);
    if (arch.contains("hash") && arch.at("hash").get<std::string>() != m.arch_hash())
      throw ValidationError("model: architecture hash mismatch");
    m.theta = Eigen::VectorXd::Zero(m.parameter_count());
    const auto& w = j.at("weights");
    for (const auto& b : m.blocks()) {
      const auto& rows = w.at(b.name);
      if (static_cast<int>(rows.size()) != b.rows) throw ValidationError("model: bad shape for " + b.name);
      for (int r = 0; r < b.rows; ++r) {
        if (static_cast<int>(rows[r].size()) != b.cols) throw ValidationError("model: bad shape for " + b.name);
        for (int c = 0; c < b.cols; ++c)
          m.theta(b.offset + static_cast<Eigen::Index>(c) * b.rows + r) = rows[r][c].get<double>();
      }
    }
    m.validate();
    return m;
  });
}

Json scene_to_json(Task task, const SceneConfig& c) {
  return {{"task", to_string(task)},
          {"dt", c.dt},
          {"max_steps", c.max_steps},
          {"drift_max", c.drift_max},
          {"reach_tol", c.reach_tol},
          {"gripper_radius", c.gripper_radius},
          {"weights", {{"hook", c.w_hook}, {"reach", c.w_reach}, {"hammer", c.w_hammer}}},
          {"thermos", {{"pos", vec(c.thermos_pos)}, {"radius", c.thermos_radius}, {"mass", c.thermos_mass},
                       {"goal", vec(c.thermos_goal)}}},
          {"cylinder", {{"pos", vec(c.cylinder_pos)}, {"radius", c.cylinder_radius}, {"mass", c.cylinder_mass}}},
          {"wall", {{"y", c.wall_y}, {"thickness", c.wall_thickness}, {"gap", c.wall_gap}}},
          {"peg", {{"face", vec(c.peg_face)}, {"width", c.peg_width}, {"length", c.peg_length},
                   {"travel", c.peg_travel}, {"mass", c.peg_mass}, {"decel", c.peg_decel}}},
          {"table_decel", c.table_decel},
          {"standoff", c.standoff}};
}

Json episode_config_to_json(const EpisodeConfig& cfg) {
  return {{"scene", scene_to_json(Task::Hammer, cfg.scene)},
          {"mppi", {{"horizon", cfg.mppi.horizon}, {"n_rollouts", cfg.mppi.n_rollouts},
                    {"sigma", {cfg.mppi.sigma.x(), cfg.mppi.sigma.y(), cfg.mppi.sigma.z()}},
                    {"temperature", cfg.mppi.temperature}, {"seed", cfg.mppi.seed}}},
          {"gripper", {{"width", cfg.gripper.width}, {"friction_angle", cfg.gripper.friction_angle},
                       {"radius", cfg.gripper.radius}}}};
}

std::string config_hash(const Json& j) {
  std::uint64_t h = 0;
  for (char c : j.dump()) h = splitmix64(h ^ static_cast<unsigned char>(c));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string trajectory_jsonl(const Trajectory& traj) {
  std::string out;
  for (const auto& s : traj.steps) {
    Json contacts = Json::array();
    for (const auto& c : s.contacts)
      contacts.push_back({{"body_a", c.body_a}, {"body_b", c.body_b}, {"point", vec(c.point)},
                          {"normal", vec(c.normal)}, {"depth", c.depth}, {"impulse", c.impulse},
                          {"impulse_vec", vec(c.impulse_vec)}});
    Json bodies = Json::array();
    for (const auto& p : s.body_poses) bodies.push_back(pose(p));
    const auto& r = s.reward;
    const Json terms = {{"completion", r.completion},
                        {"guidance", r.guidance},
                        {"total", r.total},
                        {"penalties", {{"dropped", r.penalties.dropped},
                                       {"gripper_contact", r.penalties.gripper_contact},
                                       {"wrong_part", r.penalties.wrong_part},
                                       {"drift", r.penalties.drift}}}};
    out += Json{{"t", s.t}, {"tool_pose", pose(s.tool_pose)}, {"body_poses", bodies}, {"contacts", contacts},
                {"reward_terms", terms}}
               .dump() +
           "\n";
  }
  return out;
}

Json manifest_to_json(const DatasetManifest& m, const CollectStats& stats) {
  return {{"task", to_string(m.task)},
          {"train_tools", m.train_tools},
          {"eval_tools", m.eval_tools},
          {"episodes_per_tool", m.episodes_per_tool},
          {"eval_episodes", m.eval_episodes},
          {"seed", m.seed},
          {"config_hash", m.config_hash},
          {"stats", {{"episodes", stats.episodes}, {"grasp_failures", stats.grasp_failures},
                     {"blowups", stats.blowups}, {"failed_rollouts", stats.failed_rollouts}}}};
}

DatasetManifest manifest_from_json(const Json& j) {
  return guarded("manifest", [&] {
    DatasetManifest m;
    m.task = parse_task(j.at("task").get<std::string>());
    m.train_tools = j.at("train_tools").get<std::vector<int>>();
    m.eval_tools = j.value("eval_tools", std::vector<int>{});
    m.episodes_per_tool = j.value("episodes_per_tool", 0);
    m.eval_episodes = j.value("eval_episodes", 0);
    m.seed = j.value("seed", std::uint64_t{0});
    m.config_hash = j.value("config_hash", std::string{});
    return m;
  });
}

Json record_to_json(const EpisodeRecord& r) {
  return {{"tool_id", r.tool_id},       {"episode", r.episode},
          {"grasp_idx", r.grasp_idx},   {"inter_idx", r.inter_idx},
          {"grasp_success", r.grasp_success}, {"task_success", r.task_success},
          {"touched", r.touched},       {"gated", r.gated},
          {"contact_keypoint", r.contact_keypoint}, {"reward", r.reward},
          {"completion_sum", r.completion_sum}};
}

}  // namespace gift
