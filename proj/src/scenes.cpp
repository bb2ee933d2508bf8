#include <algorithm>
#include <cmath>
#include <numbers>

#include "gift/sim.hpp"

namespace gift {

std::string to_string(Task task) {
  switch (task) {
    case Task::Hook: return "hook";
    case Task::Reach: return "reach";
    case Task::Hammer: return "hammer";
  }
  return "hook";
}

Task parse_task(const std::string& s) {
  if (s == "hook") return Task::Hook;
  if (s == "reach") return Task::Reach;
  if (s == "hammer") return Task::Hammer;
  throw ValidationError("unknown task '" + s + "'");
}

double SceneConfig::task_weight(Task task) const {
  switch (task) {
    case Task::Hook: return w_hook;
    case Task::Reach: return w_reach;
    case Task::Hammer: return w_hammer;
  }
  return 1.0;
}

void TaskEnv::refresh_target() {
  if (x_target_body >= 0) x_target = world.bodies[x_target_body].pose.apply(x_target_local);
}

namespace {

const Material kThermos{1.0, 0.3, 0.5};
const Material kWall{1.0, 0.3, 0.5};
const Material kCylinder{1.0, 0.5, 0.4};
const Material kPeg{1.0, 0.9, 0.3};
const Material kChannel{1.0, 0.2, 0.3};
const Material kGripper{1.0, 0.1, 1.0};

std::vector<Vec2> box(double x0, double x1, double y0, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

Body static_body(std::initializer_list<Shape> shapes) {
  Body b;
  b.kind = BodyKind::Static;
  for (const auto& s : shapes) b.shapes.push_back(s);
  return b;
}

void build_hook(TaskEnv& env) {
  const SceneConfig& cfg = env.config;
  const double r = cfg.thermos_radius;
  const double hx0 = r - 0.005, hx1 = r + 0.05, hh = 0.01;
  const double a1 = std::numbers::pi * r * r, a2 = (hx1 - hx0) * 2.0 * hh;
  const Vec2 c2(0.5 * (hx0 + hx1), 0.0);
  const Vec2 com = c2 * (a2 / (a1 + a2));
  const double m1 = cfg.thermos_mass * a1 / (a1 + a2), m2 = cfg.thermos_mass - m1;
  Body th;
  th.kind = BodyKind::Dynamic;
  th.mass = cfg.thermos_mass;
  th.inertia = 0.5 * m1 * r * r + m1 * com.squaredNorm() +
               m2 * ((hx1 - hx0) * (hx1 - hx0) + 4.0 * hh * hh) / 12.0 + m2 * (c2 - com).squaredNorm();
  th.lin_decel = cfg.table_decel;
  th.ang_decel = 20.0;
  th.shapes.push_back(Shape::disc(-com, r, kThermos, ShapeTag::ThermosBody));
  std::vector<Vec2> handle = box(hx0, hx1, -hh, hh);
  for (auto& v : handle) v -= com;
  th.shapes.push_back(Shape::polygon(handle, kThermos, ShapeTag::ThermosHandle));
  th.pose.p = cfg.thermos_pos + com;
  env.target = env.world.add(th);
  env.target_ref_local = -com;
  env.x_target_body = env.target;
  env.x_target_local = c2 - com;
}

void build_reach(TaskEnv& env) {
  const SceneConfig& cfg = env.config;
  const double y0 = cfg.wall_y, y1 = cfg.wall_y + cfg.wall_thickness, g = 0.5 * cfg.wall_gap;
  env.world.add(static_body({Shape::polygon(box(-0.4, -g, y0, y1), kWall, ShapeTag::Wall),
                             Shape::polygon(box(g, 0.4, y0, y1), kWall, ShapeTag::Wall)}));
  Body cyl;
  cyl.kind = BodyKind::Dynamic;
  cyl.mass = cfg.cylinder_mass;
  cyl.inertia = 0.5 * cfg.cylinder_mass * cfg.cylinder_radius * cfg.cylinder_radius;
  cyl.lin_decel = cfg.table_decel;
  cyl.ang_decel = 20.0;
  cyl.shapes.push_back(Shape::disc(Vec2::Zero(), cfg.cylinder_radius, kCylinder, ShapeTag::Cylinder));
  cyl.pose.p = cfg.cylinder_pos;
  env.target = env.world.add(cyl);
  env.x_target = Vec2(0.0, cfg.wall_y);
}

void build_hammer(TaskEnv& env) {
  const SceneConfig& cfg = env.config;
  const double hw = 0.5 * cfg.peg_width, hl = 0.5 * cfg.peg_length;
  Body peg;
  peg.kind = BodyKind::Dynamic;
  peg.mass = cfg.peg_mass;
  peg.inertia = cfg.peg_mass * (cfg.peg_width * cfg.peg_width + cfg.peg_length * cfg.peg_length) / 12.0;
  peg.lin_decel = cfg.peg_decel;
  peg.prismatic = true;
  peg.axis = Vec2::UnitY();
  peg.pose.p = cfg.peg_face + Vec2(0.0, hl);
  peg.anchor = peg.pose.p;
  peg.s_min = 0.0;
  peg.s_max = cfg.peg_travel;
  peg.shapes.push_back(Shape::polygon(box(-hw, hw, -hl, hl), kPeg, ShapeTag::Peg));
  env.target = env.world.add(peg);
  const double cy0 = cfg.peg_face.y() + cfg.peg_travel, cy1 = cy0 + 0.1, gap = 0.002;
  const double cx = cfg.peg_face.x();
  env.world.add(static_body({Shape::polygon(box(cx - 0.15, cx - hw - gap, cy0, cy1), kChannel, ShapeTag::Channel),
                             Shape::polygon(box(cx + hw + gap, cx + 0.15, cy0, cy1), kChannel, ShapeTag::Channel)}));
  env.target_ref_local = Vec2(0.0, -hl);
  env.x_target_body = env.target;
  env.x_target_local = Vec2(0.0, -hl);
}

bool tool_touches(const TaskEnv& env, const ContactEvent& c, int other, bool gripper, ShapeTag other_tag) {
  int tool_side;
  if (c.body_a == env.tool && c.body_b == other) tool_side = 0;
  else if (c.body_b == env.tool && c.body_a == other) tool_side = 1;
  else return false;
  const ShapeTag tt = tool_side == 0 ? c.tag_a : c.tag_b;
  const ShapeTag ot = tool_side == 0 ? c.tag_b : c.tag_a;
  if ((tt == ShapeTag::Gripper) != gripper) return false;
  return other_tag == ShapeTag::None || ot == other_tag;
}

int nearest_index(const boost::container::static_vector<Vec2, 32>& pts, const Vec2& x) {
  int best = -1;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double di = (pts[i] - x).squaredNorm();
    if (di < d) {
      d = di;
      best = static_cast<int>(i);
    }
  }
  return best;
}

RewardTerms finish(const TaskEnv& env, RewardTerms r) {
  r.penalties.dropped = !env.grasp_valid;
  if (r.penalties.any()) r.completion = 0.0;
  r.guidance = -std::tanh((env.inter_world() - env.x_target).norm());
  r.total = env.config.task_weight(env.task) * r.completion + r.guidance;
  return r;
}

}  // namespace

TaskEnv make_scene(Task task, const SceneConfig& config) {
  if (!(config.dt > 0.0) || config.max_steps < 1) throw ValidationError("scene needs dt > 0 and max_steps >= 1");
  TaskEnv env;
  env.task = task;
  env.config = config;
  env.world.dt = config.dt;
  switch (task) {
    case Task::Hook: build_hook(env); break;
    case Task::Reach: build_reach(env); break;
    case Task::Hammer: build_hammer(env); break;
  }
  env.refresh_target();
  env.target_init = env.target_position();
  return env;
}

void attach_tool(TaskEnv& env, const ToolShape& shape, const Vec2& k_grasp, const Vec2& k_inter) {
  if (project_to_outline(shape.outline, k_grasp).distance > 0.025)
    throw ValidationError("attach_tool: grasp point is off the tool boundary");
  const Vec2 d = k_inter - k_grasp;
  if (d.norm() < 1e-6) throw ValidationError("attach_tool: grasp and interaction points coincide");

  double heading = 0.0;
  Vec2 approach = Vec2::Zero();
  switch (env.task) {
    case Task::Hook:
      heading = -0.5 * std::numbers::pi;
      approach = Vec2::UnitY();
      break;
    case Task::Reach:
      heading = 0.5 * std::numbers::pi;
      approach = -Vec2::UnitY();
      break;
    case Task::Hammer:
      heading = 0.0;
      approach = -Vec2::UnitY();
      break;
  }

  Body tool;
  tool.kind = BodyKind::Kinematic;
  const MassProperties mp = tool_mass(shape);
  tool.mass = mp.mass;
  tool.inertia = mp.inertia;
  tool.com_local = mp.com;
  tool.ref_local = k_grasp;
  tool.shapes.push_back(Shape::polygon(shape.handle().vertices, shape.handle().material, ShapeTag::ToolHandle));
  tool.shapes.push_back(Shape::polygon(shape.head().vertices, shape.head().material, ShapeTag::ToolHead));
  tool.shapes.push_back(Shape::disc(k_grasp, env.config.gripper_radius, kGripper, ShapeTag::Gripper));
  tool.pose.theta = heading - std::atan2(d.y(), d.x());

  if (env.tool < 0) env.tool = env.world.add(tool);
  else env.world.bodies[env.tool] = tool;
  Body& placed = env.world.bodies[env.tool];
  env.grasp_local = k_grasp;
  env.inter_local = k_inter;

  double standoff = env.config.standoff;
  for (int attempt = 0;; ++attempt) {
    placed.pose.p = env.x_target + approach * standoff - rotate(k_inter, placed.pose.theta);
    placed.update_world();
    bool clear = true;
    for (const auto& c : env.world.detect(kContactMargin))
      if (c.body_a == env.tool || c.body_b == env.tool) clear = false;
    if (clear) break;
    if (attempt >= 60) throw ValidationError("attach_tool: no collision-free initial pose");
    standoff += 0.01;
  }
}

bool is_tool_target_contact(const TaskEnv& env, const ContactEvent& c) {
  return tool_touches(env, c, env.target, false, ShapeTag::None);
}

RewardTerms reward_hook(const TaskEnv& env, const ContactList& contacts) {
  RewardTerms r;
  bool touching = false;
  for (const auto& c : contacts) {
    if (tool_touches(env, c, env.target, false, ShapeTag::ThermosHandle)) touching = true;
    if (tool_touches(env, c, env.target, false, ShapeTag::ThermosBody)) r.penalties.wrong_part = true;
    if (tool_touches(env, c, env.target, true, ShapeTag::None)) r.penalties.gripper_contact = true;
  }
  const Vec2 pos = env.target_position();
  r.penalties.drift = std::abs(pos.x() - env.target_init.x()) > env.config.drift_max;
  if (touching) r.completion = 1.0 - std::tanh((pos - env.config.thermos_goal).norm());
  return finish(env, r);
}

RewardTerms reward_reach(const TaskEnv& env, const ContactList& contacts) {
  RewardTerms r;
  for (const auto& c : contacts) {
    if (c.body_a != env.tool && c.body_b != env.tool) continue;
    const bool gripper = (c.body_a == env.tool ? c.tag_a : c.tag_b) == ShapeTag::Gripper;
    const ShapeTag other = c.body_a == env.tool ? c.tag_b : c.tag_a;
    if (gripper && other == ShapeTag::Wall) r.penalties.gripper_contact = true;
  }
  if ((env.inter_world() - env.x_target).norm() < env.config.reach_tol)
    r.completion = std::tanh((env.target_position() - env.target_init).norm());
  return finish(env, r);
}

RewardTerms reward_hammer(const TaskEnv& env, const ContactList& contacts, double strike_impulse) {
  RewardTerms r;
  for (const auto& c : contacts)
    if (tool_touches(env, c, env.target, true, ShapeTag::None)) r.penalties.gripper_contact = true;
  const double a = strike_impulse / (env.config.peg_mass * env.world.dt);
  r.completion = a * a;
  return finish(env, r);
}

StepResult step(TaskEnv& env, const Action& action) {
  if (env.tool < 0) throw ValidationError("step: no tool attached");
  StepResult out;
  out.contacts = world_step(env.world, env.tool, env.grasp_local, action);
  env.refresh_target();
  double strike = 0.0;
  if (!env.touched) {
    for (const auto& c : out.contacts) {
      if (!is_tool_target_contact(env, c)) continue;
      env.touched = true;
      env.first_contact = c;
      env.first_contact_local = env.world.bodies[env.tool].pose.inverse(c.point);
      if (env.gating) env.gated = nearest_index(env.gate_keypoints, env.first_contact_local) != env.gate_keypoint;
      break;
    }
    if (env.touched && env.task == Task::Hammer) {
      const Vec2 axis = env.world.bodies[env.target].axis;
      for (const auto& c : out.contacts) {
        if (!is_tool_target_contact(env, c)) continue;
        const double sign = c.body_b == env.target ? 1.0 : -1.0;
        strike += sign * c.impulse_vec.dot(axis);
      }
      strike = std::max(0.0, strike);
      env.hammer_struck = true;
    }
  }
  switch (env.task) {
    case Task::Hook: out.reward = reward_hook(env, out.contacts); break;
    case Task::Reach: out.reward = reward_reach(env, out.contacts); break;
    case Task::Hammer: out.reward = reward_hammer(env, out.contacts, strike); break;
  }
  if (env.gated) {
    out.reward.completion = 0.0;
    out.reward.total = out.reward.guidance;
  }
  env.penalized = env.penalized || out.reward.penalties.any();
  env.completion_sum += out.reward.completion;
  return out;
}

std::optional<ContactEvent> first_contact(const Trajectory& trajectory) {
  for (const auto& s : trajectory.steps) {
    for (const auto& c : s.contacts) {
      const bool pair = (c.body_a == trajectory.tool_body && c.body_b == trajectory.target_body) ||
                        (c.body_b == trajectory.tool_body && c.body_a == trajectory.target_body);
      if (!pair) continue;
      const ShapeTag tool_tag = c.body_a == trajectory.tool_body ? c.tag_a : c.tag_b;
      if (tool_tag != ShapeTag::Gripper) return c;
    }
  }
  return std::nullopt;
}

bool task_success(const Trajectory& trajectory) {
  const SceneConfig& cfg = trajectory.config;
  switch (trajectory.task) {
    case Task::Hook:
      return (trajectory.target_final - cfg.thermos_goal).norm() < 0.05 && !trajectory.penalized;
    case Task::Reach:
      return (trajectory.target_final - trajectory.target_init).norm() > 0.05;
    case Task::Hammer:
      return trajectory.target_final_joint > 0.5 * cfg.peg_length;
  }
  return false;
}

}  // namespace gift
