#include "gift/plan.hpp"

#include <algorithm>

namespace gift {

void MppiConfig::validate() const {
  if (horizon < 1) throw ValidationError("mppi: horizon must be >= 1");
  if (n_rollouts < 1) throw ValidationError("mppi: n_rollouts must be >= 1");
  if (!(sigma.minCoeff() >= 0.0)) throw ValidationError("mppi: sigma must be >= 0");
  if (!(temperature > 0.0)) throw ValidationError("mppi: temperature must be > 0");
}

Plan perturb_plan(const Plan& base, const MppiConfig& cfg, std::uint64_t unit_seed, int m) {
  Rng rng = make_rng(unit_seed, {static_cast<std::uint64_t>(m)});
  std::normal_distribution<double> nd;
  Plan p(base.size());
  for (std::size_t h = 0; h < base.size(); ++h) {
    const double ex = nd(rng), ey = nd(rng), et = nd(rng);
    p[h] = clamp_action({base[h].dx + cfg.sigma.x() * ex, base[h].dy + cfg.sigma.y() * ey,
                         base[h].dtheta + cfg.sigma.z() * et});
  }
  return p;
}

std::vector<double> mppi_weights(const std::vector<double>& returns, double temperature) {
  double best = -std::numeric_limits<double>::infinity();
  for (double r : returns)
    if (!std::isnan(r)) best = std::max(best, r);
  if (best == -std::numeric_limits<double>::infinity()) throw DivergenceError("mppi: every rollout failed");
  std::vector<double> w(returns.size(), 0.0);
  double sum = 0.0;
  for (std::size_t m = 0; m < returns.size(); ++m) {
    if (std::isnan(returns[m])) continue;
    w[m] = std::exp((returns[m] - best) / temperature);
    sum += w[m];
  }
  for (double& x : w) x /= sum;
  return w;
}

GraspResult grasp_from_pair(const ToolShape& shape, int i, int j, const Vec2& reference) {
  GraspResult g;
  g.valid = true;
  g.pair = {i, j};
  g.grasp_point = 0.5 * (shape.boundary[i].point + shape.boundary[j].point);
  g.distance_to_keypoint = (g.grasp_point - reference).norm();
  return g;
}

GraspResult plan_grasp(const ToolShape& shape, const Vec2& k_grasp, const GripperSpec& gripper) {
  GraspResult best;
  for (const auto& [i, j] : antipodal_pairs(shape, k_grasp, gripper.radius, gripper.friction_angle, gripper.width)) {
    const GraspResult g = grasp_from_pair(shape, i, j, k_grasp);
    if (g.distance_to_keypoint < best.distance_to_keypoint) best = g;
  }
  return best;
}

std::string to_string(Mode mode) { return mode == Mode::Train ? "train" : "eval"; }

int nearest_keypoint(const std::vector<Vec2>& K, const Vec2& x) {
  int best = -1;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < K.size(); ++i) {
    const double di = (K[i] - x).squaredNorm();
    if (di < d) {
      d = di;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Episode rollout_episode(const ToolShape& shape, const KeypointSet& K, int grasp_idx, int inter_idx, Task task,
                        const EpisodeConfig& cfg, Mode mode, std::uint64_t seed) {
  if (grasp_idx < 0 || grasp_idx >= K.size()) throw ValidationError("rollout: grasp index out of range");
  const GraspResult grasp = plan_grasp(shape, K.points[grasp_idx], cfg.gripper);
  return rollout_with_grasp(shape, K, grasp, grasp_idx, inter_idx, task, cfg, mode, seed);
}

Episode rollout_with_grasp(const ToolShape& shape, const KeypointSet& K, const GraspResult& grasp, int grasp_idx,
                           int inter_idx, Task task, const EpisodeConfig& cfg, Mode mode, std::uint64_t seed) {
  if (inter_idx < 0 || inter_idx >= K.size()) throw ValidationError("rollout: interaction index out of range");
  Episode ep;
  ep.sampled_inter_idx = inter_idx;
  ExperienceTuple& t = ep.tuple;
  t.tool_id = shape.tool_id;
  t.keypoints = K.points;
  t.normals = keypoint_normals(shape, K.points);
  t.grasp_idx = grasp_idx;
  t.inter_idx = inter_idx;
  t.mode = mode;
  Trajectory& traj = ep.trajectory;
  traj.task = task;
  traj.config = cfg.scene;
  traj.grasp_valid = grasp.valid;
  traj.grasp_point = grasp.grasp_point;
  if (!grasp.valid) return ep;

  TaskEnv env = make_scene(task, cfg.scene);
  try {
    attach_tool(env, shape, grasp.grasp_point, K.points[inter_idx]);
  } catch (const ValidationError&) {
    traj.grasp_valid = false;
    return ep;
  }
  t.grasp_success = true;
  if (mode == Mode::Eval) {
    env.gating = true;
    env.gate_keypoints.assign(K.points.begin(), K.points.end());
    env.gate_keypoint = inter_idx;
  }
  traj.tool_body = env.tool;
  traj.target_body = env.target;
  traj.target_init = env.target_init;

  auto reward = [](TaskEnv& e, const Action& a) { return step(e, a).reward.total; };
  Plan base(cfg.mppi.horizon);
  double R = 0.0;
  for (int s = 0; s < cfg.scene.max_steps; ++s) {
    const MppiStep ms = mppi_step(env, reward, base, cfg.mppi, derive_seed(seed, {cfg.mppi.seed, static_cast<std::uint64_t>(s)}));
    ep.failed_rollouts += ms.diagnostics.failed;
    base = ms.next_base;
    const StepResult r = step(env, ms.action);
    R += r.reward.total;
    if (cfg.record) {
      StepLog log;
      log.t = env.world.time;
      log.tool_pose = env.world.bodies[env.tool].pose;
      for (const auto& b : env.world.bodies) log.body_poses.push_back(b.pose);
      log.contacts.assign(r.contacts.begin(), r.contacts.end());
      log.reward = r.reward;
      traj.steps.push_back(std::move(log));
    }
  }
  traj.target_final = env.target_position();
  traj.target_final_joint = env.world.bodies[env.target].prismatic ? env.world.bodies[env.target].joint_position() : 0.0;
  traj.penalized = env.penalized;

  ep.completion_sum = env.completion_sum;
  ep.touched = env.touched;
  ep.gated = env.gated;
  t.reward = R;
  if (mode == Mode::Train && env.touched) {
    t.inter_idx = nearest_keypoint(K.points, env.first_contact_local);
  }
  t.task_success = task_success(traj);
  return ep;
}

std::optional<Vec2> first_contact_local(const Trajectory& trajectory) {
  const auto c = first_contact(trajectory);
  if (!c || c->step < 0 || c->step >= static_cast<int>(trajectory.steps.size())) return std::nullopt;
  return trajectory.steps[c->step].tool_pose.inverse(c->point);
}

bool is_compatible(const Trajectory& trajectory, const Vec2& grasp_point, const Vec2& inter_point, double delta) {
  if (!(delta > 0.0)) throw ValidationError("is_compatible: delta must be > 0");
  if (!trajectory.grasp_valid) return false;
  const auto contact = first_contact_local(trajectory);
  if (!contact) return false;
  return (trajectory.grasp_point - grasp_point).norm() <= delta && (*contact - inter_point).norm() <= delta;
}

double default_compat_delta(const ToolShape& shape) { return 0.1 * shape.bbox_diag; }

}  // namespace gift
