#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "gift/keypoints.hpp"
#include "gift/parallel.hpp"
#include "gift/rng.hpp"
#include "gift/sim.hpp"

namespace gift {

struct MppiConfig {
  int horizon = 16;
  int n_rollouts = 32;
  Vec3 sigma{0.01, 0.01, 0.03};  // dx (m), dy (m), dtheta (rad)
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int threads = 1;  // rollout evaluation workers

  void validate() const;
};

using Plan = std::vector<Action>;

struct MppiDiagnostics {
  std::vector<double> returns;  // NaN for rollouts that blew up
  std::vector<double> weights;
  int failed = 0;
};

struct MppiStep {
  Action action;
  Plan plan;       // reward-weighted plan before the shift
  Plan next_base;  // plan shifted left by one with a zero action appended
  MppiDiagnostics diagnostics;
};

/// Gaussian perturbation of `base` for rollout `m`, clamped to the action limits.
Plan perturb_plan(const Plan& base, const MppiConfig& cfg, std::uint64_t unit_seed, int m);

/// Softmax weights exp((R_m - max R)/temperature); NaN returns get weight 0.
/// Throws DivergenceError when every return is NaN.
std::vector<double> mppi_weights(const std::vector<double>& returns, double temperature);

/// One MPPI replanning step. `reward(env, action)` advances a private copy of
/// the environment and returns the step reward. Rollout m draws its noise
/// from derive_seed(unit_seed, {m}), so the result does not depend on how
/// rollouts are scheduled.
template <class Env, class RewardFn>
MppiStep mppi_step(const Env& env, RewardFn&& reward, const Plan& base, const MppiConfig& cfg,
                   std::uint64_t unit_seed) {
  cfg.validate();
  if (static_cast<int>(base.size()) != cfg.horizon) throw ValidationError("mppi_step: base plan length must equal H");
  const int n = cfg.n_rollouts;
  std::vector<Plan> plans(n);
  std::vector<double> returns(n);
  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t m) {
        plans[m] = perturb_plan(base, cfg, unit_seed, static_cast<int>(m));
        Env sim = env;
        double total = 0.0;
        try {
          for (const Action& a : plans[m]) total += reward(sim, a);
        } catch (const SimulationError&) {
          total = std::numeric_limits<double>::quiet_NaN();
        }
        returns[m] = total;
      },
      cfg.threads);

  MppiStep out;
  out.diagnostics.weights = mppi_weights(returns, cfg.temperature);
  for (double r : returns) out.diagnostics.failed += std::isnan(r) ? 1 : 0;
  out.diagnostics.returns = std::move(returns);
  out.plan = base;
  for (int h = 0; h < cfg.horizon; ++h) {
    double dx = 0.0, dy = 0.0, dth = 0.0;
    for (int m = 0; m < n; ++m) {
      const double w = out.diagnostics.weights[m];
      if (w == 0.0) continue;
      dx += w * (plans[m][h].dx - base[h].dx);
      dy += w * (plans[m][h].dy - base[h].dy);
      dth += w * (plans[m][h].dtheta - base[h].dtheta);
    }
    out.plan[h] = {base[h].dx + dx, base[h].dy + dy, base[h].dtheta + dth};
  }
  out.action = out.plan.front();
  out.next_base.assign(out.plan.begin() + 1, out.plan.end());
  out.next_base.push_back(Action{});
  return out;
}

struct GraspResult {
  bool valid = false;
  std::pair<int, int> pair{-1, -1};  // boundary sample indices
  Vec2 grasp_point = Vec2::Zero();   // pair midpoint, tool frame
  double distance_to_keypoint = std::numeric_limits<double>::infinity();
};

/// Among antipodal pairs within `gripper.radius` of k_grasp, the one whose
/// midpoint is nearest k_grasp (lexicographically first on ties).
GraspResult plan_grasp(const ToolShape& shape, const Vec2& k_grasp, const GripperSpec& gripper = {});

/// Builds a GraspResult for an explicit antipodal pair.
GraspResult grasp_from_pair(const ToolShape& shape, int i, int j, const Vec2& reference);

enum class Mode { Train, Eval };
std::string to_string(Mode mode);

struct EpisodeConfig {
  SceneConfig scene;
  MppiConfig mppi;
  GripperSpec gripper;
  bool record = true;  // keep the per-step trajectory log
};

struct ExperienceTuple {
  int tool_id = 0;
  std::vector<Vec2> keypoints;
  std::vector<Vec2> normals;  // outward boundary normal per keypoint
  int grasp_idx = 0;
  int inter_idx = 0;
  double reward = 0.0;
  bool grasp_success = false;
  bool task_success = false;
  Mode mode = Mode::Train;
};

struct Episode {
  Trajectory trajectory;
  ExperienceTuple tuple;
  int sampled_inter_idx = 0;  // provisional k_inter before replacement
  double completion_sum = 0.0;
  bool touched = false;
  bool gated = false;
  int failed_rollouts = 0;
};

/// Full episode with the grasp from plan_grasp(K[grasp_idx]).
Episode rollout_episode(const ToolShape& shape, const KeypointSet& K, int grasp_idx, int inter_idx, Task task,
                        const EpisodeConfig& cfg, Mode mode, std::uint64_t seed);

/// Full episode with a caller-chosen grasp (baselines). `grasp_idx` is only
/// recorded in the tuple.
Episode rollout_with_grasp(const ToolShape& shape, const KeypointSet& K, const GraspResult& grasp, int grasp_idx,
                           int inter_idx, Task task, const EpisodeConfig& cfg, Mode mode, std::uint64_t seed);

/// Index of the keypoint nearest x (lowest index on ties).
int nearest_keypoint(const std::vector<Vec2>& K, const Vec2& x);

/// First tool-target contact point in the tool frame.
std::optional<Vec2> first_contact_local(const Trajectory& trajectory);

/// True iff the realized grasp midpoint is within delta of grasp_point and
/// the first contact is within delta of inter_point (tool frame).
bool is_compatible(const Trajectory& trajectory, const Vec2& grasp_point, const Vec2& inter_point, double delta);

/// 0.1 x bbox diagonal.
double default_compat_delta(const ToolShape& shape);

}  // namespace gift
