#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/container/static_vector.hpp>

#include "gift/geom.hpp"

namespace gift {

constexpr int kMaxShapeVerts = 8;
constexpr int kMaxBodyShapes = 3;
constexpr int kMaxBodies = 10;
constexpr int kMaxContacts = 48;

constexpr double kMaxStepTranslation = 0.02;  // m per step, per axis
constexpr double kMaxStepRotation = 0.05;     // rad per step
constexpr double kContactMargin = 1e-3;       // gap below which shapes count as touching
constexpr double kPenetrationTol = 1e-4;

enum class BodyKind { Static, Dynamic, Kinematic };

/// Semantic role of a shape, used by the rewards and penalties.
enum class ShapeTag : std::uint8_t {
  None,
  ToolHandle,
  ToolHead,
  Gripper,
  ThermosBody,
  ThermosHandle,
  Wall,
  Cylinder,
  Peg,
  Channel,
};

std::string to_string(ShapeTag tag);

struct Shape {
  bool circle = false;
  int n = 0;  // polygon vertex count
  std::array<Vec2, kMaxShapeVerts> v{};  // body frame, CCW
  Vec2 center = Vec2::Zero();            // circle center, body frame
  double radius = 0.0;
  Material material;
  ShapeTag tag = ShapeTag::None;

  static Shape polygon(const std::vector<Vec2>& vertices, const Material& m, ShapeTag tag);
  static Shape disc(const Vec2& center, double radius, const Material& m, ShapeTag tag);
};

/// Shape in world coordinates plus its bounding box.
struct WorldShape {
  bool circle = false;
  int n = 0;
  std::array<Vec2, kMaxShapeVerts> v{};
  std::array<Vec2, kMaxShapeVerts> normal{};  // outward normal of edge v[k] -> v[k+1]
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  Vec2 lo = Vec2::Zero(), hi = Vec2::Zero();
};

struct Pose {
  Vec2 p = Vec2::Zero();
  double theta = 0.0;

  Vec2 apply(const Vec2& local) const { return p + rotate(local, theta); }
  Vec2 inverse(const Vec2& world) const { return rotate(world - p, -theta); }
};

/// Rigid body. For dynamic bodies the frame origin is the center of mass.
struct Body {
  BodyKind kind = BodyKind::Static;
  Pose pose;
  Vec2 v = Vec2::Zero();
  double w = 0.0;
  double mass = 0.0, inertia = 0.0;  // kinematic tool: used for its effective impact mass
  Vec2 com_local = Vec2::Zero();     // kinematic bodies only
  Vec2 ref_local = Vec2::Zero();     // point whose velocity is `v` (kinematic: the grasp pivot)
  double lin_decel = 0.0;            // m/s^2, tabletop friction analog
  double ang_decel = 0.0;            // rad/s^2

  // Optional prismatic joint: the body translates along `axis` only, with
  // s = (p - anchor).axis kept inside [s_min, s_max] and fixed orientation.
  bool prismatic = false;
  Vec2 axis = Vec2::UnitY();
  Vec2 anchor = Vec2::Zero();
  double s_min = 0.0, s_max = 0.0;

  boost::container::static_vector<Shape, kMaxBodyShapes> shapes;
  boost::container::static_vector<WorldShape, kMaxBodyShapes> world;
  Vec2 lo = Vec2::Zero(), hi = Vec2::Zero();  // union of the shape boxes

  double inv_mass() const { return kind == BodyKind::Dynamic && mass > 0.0 ? 1.0 / mass : 0.0; }
  double inv_inertia() const { return kind == BodyKind::Dynamic && !prismatic && inertia > 0.0 ? 1.0 / inertia : 0.0; }
  double joint_position() const { return (pose.p - anchor).dot(axis); }
  void update_world();
};

struct ContactEvent {
  int step = 0;
  int body_a = 0, body_b = 0;  // normal points from a to b
  int shape_a = 0, shape_b = 0;
  ShapeTag tag_a = ShapeTag::None, tag_b = ShapeTag::None;
  Vec2 point = Vec2::Zero();
  Vec2 normal = Vec2::Zero();
  double depth = 0.0;         // > 0 overlap, < 0 gap (within the contact margin)
  double impulse = 0.0;       // normal impulse, N s (>= 0)
  Vec2 impulse_vec = Vec2::Zero();  // total impulse applied to body b (normal + friction)
  double normal_speed = 0.0;  // relative normal speed before resolution, m/s (< 0 approaching)
};

using ContactList = boost::container::static_vector<ContactEvent, kMaxContacts>;

/// Contact between two world shapes: normal from a to b, depth > -margin.
std::optional<ContactEvent> collide(const WorldShape& a, const WorldShape& b, double margin);

struct World {
  double time = 0.0;
  double dt = 0.02;
  int steps = 0;
  boost::container::static_vector<Body, kMaxBodies> bodies;

  int add(Body b);
  /// All shape-pair contacts with gap below `margin`, ordered by (body, shape) pair.
  ContactList detect(double margin) const;
  /// Largest overlap depth between any two shapes that may collide.
  double max_penetration() const;
};

struct Action {
  double dx = 0.0, dy = 0.0, dtheta = 0.0;
};

Action clamp_action(const Action& a);

/// Advances the world one step. The kinematic body `tool` rotates by
/// dtheta about its body-frame point `pivot` and translates by (dx, dy); if
/// that move would leave the tool penetrating something it cannot push
/// (static geometry, a joint at its limit) the move is shortened. Returns the
/// contacts resolved during the step. Throws SimulationError on non-finite state.
ContactList world_step(World& world, int tool, const Vec2& pivot, const Action& action);

// ---------------------------------------------------------------------------
// Tasks

enum class Task { Hook, Reach, Hammer };
std::string to_string(Task task);
Task parse_task(const std::string& s);

struct SceneConfig {
  double dt = 0.02;
  int max_steps = 120;
  double drift_max = 0.05;
  double reach_tol = 0.03;
  double gripper_radius = 0.015;
  double w_hook = 10000.0, w_reach = 10000.0, w_hammer = 1.0;

  // hook
  Vec2 thermos_pos{0.0, 0.32};
  double thermos_radius = 0.04;
  double thermos_mass = 0.3;
  Vec2 thermos_goal{0.0, 0.22};
  // reach
  Vec2 cylinder_pos{0.0, 0.345};
  double cylinder_radius = 0.02;
  double cylinder_mass = 0.1;
  double wall_y = 0.30, wall_thickness = 0.02, wall_gap = 0.06;
  // hammer
  Vec2 peg_face{0.0, 0.30};  // center of the struck face
  double peg_width = 0.04, peg_length = 0.06, peg_travel = 0.05, peg_mass = 0.05;
  double peg_decel = 10.0;  // insertion friction, m/s^2

  double table_decel = 2.0;  // free objects on the table, m/s^2
  double standoff = 0.05;    // initial gap between k_inter and the target approach point

  double task_weight(Task task) const;
};

struct PenaltyFlags {
  bool dropped = false;
  bool gripper_contact = false;  // gripper touches the target object (hook, hammer) or wall (reach)
  bool wrong_part = false;       // hook: tool touches the thermos body instead of the handle
  bool drift = false;            // hook: thermos moved too far along x

  bool any() const { return dropped || gripper_contact || wrong_part || drift; }
};

struct RewardTerms {
  double completion = 0.0;  // C_T
  double guidance = 0.0;    // -tanh(|k_inter - x_target|)
  PenaltyFlags penalties;
  double total = 0.0;
};

/// Per-episode task state carried alongside the world.
struct TaskEnv {
  Task task = Task::Hook;
  SceneConfig config;
  World world;
  int tool = -1;    // body index of the kinematic tool
  int target = -1;  // body index of the object acted on
  Vec2 grasp_local = Vec2::Zero();  // tool frame
  Vec2 inter_local = Vec2::Zero();  // provisional interaction keypoint, tool frame
  int x_target_body = -1;                 // x_target rides on this body when >= 0
  Vec2 x_target_local = Vec2::Zero();
  Vec2 x_target = Vec2::Zero();           // world, refreshed every step
  Vec2 target_ref_local = Vec2::Zero();   // tracked point of the target (thermos/cylinder center)
  Vec2 target_init = Vec2::Zero();
  bool grasp_valid = true;

  // contact grounding
  bool touched = false;  // first tool-target contact happened
  ContactEvent first_contact;
  Vec2 first_contact_local = Vec2::Zero();  // tool frame
  bool hammer_struck = false;

  // test-time gating: C_T is zeroed once the first contact lands nearest a
  // keypoint other than `gate_keypoint`
  bool gating = false;
  boost::container::static_vector<Vec2, 32> gate_keypoints;  // tool frame
  int gate_keypoint = -1;
  bool gated = false;

  bool penalized = false;  // any penalty at any step so far
  double completion_sum = 0.0;

  Vec2 inter_world() const { return world.bodies[tool].pose.apply(inter_local); }
  Vec2 target_position() const { return world.bodies[target].pose.apply(target_ref_local); }
  void refresh_target();
  Vec2 grasp_world() const { return world.bodies[tool].pose.apply(grasp_local); }
};

/// Builds the scene for `task` with the tool not yet attached.
TaskEnv make_scene(Task task, const SceneConfig& config = {});

/// Welds the tool to the gripper at k_grasp (tool frame) and poses it so the
/// interaction keypoint sits on the approach line in front of the target.
/// Throws ValidationError if k_grasp is farther than 0.025 m from the outline
/// (a grasp midpoint lies at most half a gripper opening inside it).
void attach_tool(TaskEnv& env, const ToolShape& shape, const Vec2& k_grasp, const Vec2& k_inter);

struct StepResult {
  ContactList contacts;
  RewardTerms reward;
};

/// One control step: world update, contact grounding, gating and reward.
StepResult step(TaskEnv& env, const Action& action);

RewardTerms reward_hook(const TaskEnv& env, const ContactList& contacts);
RewardTerms reward_reach(const TaskEnv& env, const ContactList& contacts);
/// `strike_impulse` is the tool impulse on the peg along its axis at the
/// first-contact step (0 on any other step).
RewardTerms reward_hammer(const TaskEnv& env, const ContactList& contacts, double strike_impulse);

bool is_tool_target_contact(const TaskEnv& env, const ContactEvent& c);

struct StepLog {
  double t = 0.0;
  Pose tool_pose;
  std::vector<Pose> body_poses;
  std::vector<ContactEvent> contacts;
  RewardTerms reward;
};

struct Trajectory {
  Task task = Task::Hook;
  SceneConfig config;
  std::vector<StepLog> steps;
  bool grasp_valid = true;
  Vec2 grasp_point = Vec2::Zero();  // tool frame, realized grasp midpoint
  int tool_body = -1, target_body = -1;
  Vec2 target_init = Vec2::Zero(), target_final = Vec2::Zero();  // tracked target point
  double target_final_joint = 0.0;  // hammer: peg insertion depth
  bool penalized = false;
};

/// Earliest tool-target contact in the log, if any.
std::optional<ContactEvent> first_contact(const Trajectory& trajectory);

/// hook: thermos within 0.05 m of the goal and no penalty; reach: cylinder
/// displaced by more than 0.05 m; hammer: peg inserted past half its length.
bool task_success(const Trajectory& trajectory);

}  // namespace gift
