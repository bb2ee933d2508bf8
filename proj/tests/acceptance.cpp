// Acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gift/afford.hpp"
#include "gift/harness.hpp"
#include "gift/io.hpp"
#include "gift/svg.hpp"
#include "oracles.hpp"
#include "rigged.hpp"
#include "toy_mass.hpp"

using namespace gift;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

const std::vector<ToolConfig> kConfigs = {ToolConfig::T, ToolConfig::L, ToolConfig::X};

// criterion 1

DiscreteDistribution random_distribution(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  DiscreteDistribution d;
  d.weights.resize(n);
  for (int i = 0; i < n; ++i) d.weights[i] = u(rng);
  d.weights /= d.weights.sum();
  return d;
}

Eigen::MatrixXd random_cost(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd pts(n, 2);
  for (int i = 0; i < n; ++i) pts.row(i) << u(rng), u(rng);
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = (pts.row(i) - pts.row(j)).norm();
  return c;
}

Outcome ot_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto mu = random_distribution(rng, 8), nu = random_distribution(rng, 8);
    const auto C = random_cost(rng, 8);
    SinkhornOptions opt;
    opt.epsilon = 1e-3 * C.mean();
    opt.max_iter = 100000;
    const double emd = exact_emd(mu, nu, C);
    worst = std::max(worst, std::abs(sinkhorn(mu, nu, C, opt).cost - emd) / emd);
  }
  const double dt = seconds_since(t0);
  return {worst < 1e-2 && dt < 10.0, "worst rel err " + fmt("%.2e", worst) + ", " + fmt("%.1f", dt) + " s"};
}

// criterion 2

ToolShape random_tool(std::uint64_t seed) {
  return generate_tool(static_cast<int>(seed), seed, kConfigs[seed % 3], DimRanges{}, wood(), steel());
}

std::vector<Vec2> jittered_samples(const ToolShape& shape, int M, std::mt19937_64& rng, double jitter) {
  std::uniform_int_distribution<int> pick(0, shape.size() - 1);
  std::normal_distribution<double> nd(0.0, jitter);
  std::vector<Vec2> K;
  for (int i = 0; i < M; ++i) K.push_back(shape.boundary[pick(rng)].point + Vec2(nd(rng), nd(rng)));
  return K;
}

std::vector<Vec2> plane_points(int M, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  std::vector<Vec2> K;
  for (int i = 0; i < M; ++i) K.emplace_back(u(rng), u(rng));
  return K;
}

std::vector<Vec2> unit_vectors(int M, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  std::vector<Vec2> n;
  for (int i = 0; i < M; ++i) {
    const double a = u(rng);
    n.emplace_back(std::cos(a), std::sin(a));
  }
  return n;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  double cov = 0.0, quad = 0.0;
  int quad_cases = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto tool = random_tool(seed + 300);
    const auto K = jittered_samples(tool, 8, rng, 0.01);
    const auto fd = oracle::central_difference(K, 1e-5 * tool.bbox_diag,
                                               [&](const std::vector<Vec2>& k) { return coverage_loss(tool, k); });
    cov = std::max(cov, oracle::relative_error(coverage_grad(tool, K), fd));
  }
  for (std::uint64_t seed = 0; quad_cases < 20 && seed < 200; ++seed) {
    const auto tool = random_tool(seed + 400);
    const auto K = jittered_samples(tool, 8, rng, 0.005);
    const double h = 1e-7 * tool.bbox_diag;
    bool stable = true;
    for (const auto& x : K)
      for (const Vec2 d : {Vec2(h, 0), Vec2(-h, 0), Vec2(0, h), Vec2(0, -h)})
        stable = stable && nearest_boundary(tool, x + d) == nearest_boundary(tool, x);
    if (!stable) continue;
    ++quad_cases;
    const auto fd = oracle::central_difference(K, h, [&](const std::vector<Vec2>& k) { return quadric_loss(tool, k); });
    quad = std::max(quad, oracle::relative_error(quadric_grad(tool, K), fd));
  }
  double rl = 0.0;
  for (LossVariant variant : {LossVariant::Paper, LossVariant::Log}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      GraphModel m = init_model(5, 4, 3, 500 + seed);
      m.theta *= 2.0;
      TrainingSet set;
      for (int g = 0; g < 2; ++g) set.graphs.push_back(build_graph(plane_points(4, rng), unit_vectors(4, rng)));
      set.examples = {{0, 0, 1, 1.3}, {0, 2, 3, -0.7}, {1, 3, 0, 0.9}, {1, 1, 2, 0.4}};
      const std::vector<int> batch{0, 1, 2, 3};
      const auto L = reinforce_loss(m, set, batch, variant, 1.7);
      const double h = 1e-6;
      for (Eigen::Index k = 0; k < m.theta.size(); ++k) {
        GraphModel a = m, b = m;
        a.theta(k) += h;
        b.theta(k) -= h;
        const double fd =
            (reinforce_loss(a, set, batch, variant, 1.7).loss - reinforce_loss(b, set, batch, variant, 1.7).loss) /
            (2 * h);
        rl = std::max(rl, std::abs(fd - L.grad(k)) / std::max(1e-3, std::abs(fd)));
      }
    }
  }
  const double dt = seconds_since(t0);
  const bool pass = quad_cases == 20 && cov < 1e-3 && quad < 1e-6 && rl < 1e-4 && dt < 30.0;
  return {pass, "coverage " + fmt("%.2e", cov) + ", quadric " + fmt("%.2e", quad) + " (" + std::to_string(quad_cases) +
                    " cases), reinforce " + fmt("%.2e", rl) + ", " + fmt("%.1f", dt) + " s"};
}

// criterion 3

Outcome keypoint_objective() {
  const auto t0 = Clock::now();
  const auto tools = generate_tools(50, kConfigs, 303, 0);
  KeypointObjectiveConfig cfg;
  cfg.seed = 303;
  double worst_offset = 0.0;
  int monotone = 0, beats_random = 0;
  for (const auto& tool : tools) {
    const auto r = optimize_keypoints_detailed(tool, 8, cfg);
    for (const auto& x : r.keypoints.points)
      worst_offset = std::max(worst_offset, project_to_outline(tool.outline, x).distance);
    const auto& trace = r.keypoints.loss_trace;
    bool ok = true;
    for (std::size_t i = 1; i < trace.size(); ++i) ok = ok && trace[i] <= trace[i - 1];
    monotone += ok;
    std::mt19937_64 rng(derive_seed(303, {static_cast<std::uint64_t>(tool.tool_id)}));
    std::uniform_int_distribution<int> pick(0, tool.size() - 1);
    std::vector<Vec2> rnd;
    for (int i = 0; i < 8; ++i) rnd.push_back(tool.boundary[pick(rng)].point);
    beats_random += coverage_loss(tool, r.keypoints.points) <= coverage_loss(tool, rnd);
  }
  const double dt = seconds_since(t0);
  const bool pass = worst_offset <= 1e-6 && monotone == 50 && beats_random >= 45 && dt < 120.0;
  return {pass, "max boundary offset " + fmt("%.1e", worst_offset) + ", monotone " + std::to_string(monotone) +
                    "/50, coverage <= random " + std::to_string(beats_random) + "/50, " + fmt("%.1f", dt) + " s"};
}

// criterion 4

Body free_disc(const Vec2& p, const Vec2& v, double r, double m, Material mat) {
  Body b;
  b.kind = BodyKind::Dynamic;
  b.mass = m;
  b.inertia = 0.5 * m * r * r;
  b.pose.p = p;
  b.v = v;
  b.shapes.push_back(Shape::disc(Vec2::Zero(), r, mat, ShapeTag::None));
  return b;
}

Body parked_tool() {
  Body b;
  b.kind = BodyKind::Kinematic;
  b.mass = 0.5;
  b.inertia = 1e-3;
  b.pose.p = {-1.0, -1.0};
  b.shapes.push_back(Shape::polygon({{-0.1, -0.01}, {0.1, -0.01}, {0.1, 0.01}, {-0.1, 0.01}}, wood(), ShapeTag::ToolHandle));
  return b;
}

std::vector<Action> random_actions(std::uint64_t seed, int n, double bias_y) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<Action> out;
  for (int i = 0; i < n; ++i) out.push_back({0.01 * nd(rng), 0.01 * nd(rng) + bias_y, 0.03 * nd(rng)});
  return out;
}

TaskEnv attached(Task task, const ToolShape& shape, const Vec2& grasp) {
  TaskEnv env = make_scene(task);
  attach_tool(env, shape, grasp, shape.head().centroid());
  return env;
}

Outcome physics_invariants() {
  const auto t0 = Clock::now();
  double momentum_err = 0.0, restitution_excess = 0.0, penetration = 0.0;

  {
    World w;
    const int tool = w.add(parked_tool());
    const int a = w.add(free_disc({0.0, 0.0}, {0.5, 0.05}, 0.02, 0.1, {1.0, 0.5, 0.0}));
    const int b = w.add(free_disc({0.1, 0.0}, {-0.2, 0.0}, 0.02, 0.3, {1.0, 0.5, 0.0}));
    auto momentum = [&] { return Vec2(w.bodies[a].mass * w.bodies[a].v + w.bodies[b].mass * w.bodies[b].v); };
    const Vec2 p0 = momentum();
    for (int s = 0; s < 30; ++s) world_step(w, tool, Vec2::Zero(), {});
    momentum_err = (momentum() - p0).norm();
  }

  for (double e : {0.0, 0.3, 0.8, 1.0}) {
    World w;
    const int tool = w.add(parked_tool());
    Body wall;
    wall.shapes.push_back(Shape::polygon({{0.1, -1}, {0.2, -1}, {0.2, 1}, {0.1, 1}}, {1.0, e, 0.0}, ShapeTag::Wall));
    w.add(wall);
    w.add(free_disc({0.0, 0.0}, {1.0, 0.0}, 0.02, 0.1, {1.0, 1.0, 0.0}));
    w.add(free_disc({0.0, 0.3}, {0.0, -0.5}, 0.02, 0.1, {1.0, e, 0.0}));
    w.add(free_disc({0.0, 0.2}, Vec2::Zero(), 0.02, 0.1, {1.0, e, 0.0}));
    for (int s = 0; s < 20; ++s) {
      for (const auto& c : world_step(w, tool, Vec2::Zero(), {})) {
        if (c.normal_speed >= 0.0) continue;
        const double post = (w.bodies[c.body_b].v - w.bodies[c.body_a].v).dot(c.normal);
        restitution_excess = std::max(restitution_excess, post - e * -c.normal_speed);
      }
      penetration = std::max(penetration, w.max_penetration());
    }
  }

  const ToolShape shape = generate_tool(0, 7, ToolConfig::T, DimRanges{}, wood(), steel());
  bool deterministic = true;
  for (Task task : {Task::Hook, Task::Reach, Task::Hammer}) {
    const double bias = task == Task::Hook ? -0.006 : 0.006;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      TaskEnv a = attached(task, shape, {0.0, 0.05});
      TaskEnv b = a;
      for (const auto& act : random_actions(seed, 120, bias)) {
        const double ra = step(a, act).reward.total;
        const double rb = step(b, act).reward.total;
        deterministic = deterministic && ra == rb;
        penetration = std::max(penetration, a.world.max_penetration());
      }
      for (std::size_t i = 0; i < a.world.bodies.size(); ++i)
        deterministic = deterministic && a.world.bodies[i].pose.p == b.world.bodies[i].pose.p &&
                        a.world.bodies[i].pose.theta == b.world.bodies[i].pose.theta &&
                        a.world.bodies[i].v == b.world.bodies[i].v;
    }
  }

  bool serial_parallel = true;
  {
    TaskEnv env = attached(Task::Hammer, shape, {0.0, 0.05});
    MppiConfig cfg;
    auto reward = [](TaskEnv& e, const Action& act) { return step(e, act).reward.total; };
    const Plan base(cfg.horizon);
    cfg.threads = 1;
    const auto s = mppi_step(env, reward, base, cfg, 42);
    cfg.threads = 4;
    const auto p = mppi_step(env, reward, base, cfg, 42);
    serial_parallel = s.diagnostics.returns == p.diagnostics.returns;
    for (int h = 0; h < cfg.horizon; ++h)
      serial_parallel = serial_parallel && s.plan[h].dx == p.plan[h].dx && s.plan[h].dy == p.plan[h].dy &&
                        s.plan[h].dtheta == p.plan[h].dtheta;
  }

  const double dt = seconds_since(t0);
  const bool pass = momentum_err <= 1e-9 && restitution_excess <= 1e-6 && penetration <= kPenetrationTol &&
                    deterministic && serial_parallel && dt < 60.0;
  return {pass, "momentum " + fmt("%.1e", momentum_err) + ", restitution excess " + fmt("%.1e", restitution_excess) +
                    ", penetration " + fmt("%.1e", penetration) + " m, deterministic " +
                    (deterministic ? "yes" : "no") + ", serial==parallel " + (serial_parallel ? "yes" : "no") + ", " +
                    fmt("%.1f", dt) + " s"};
}

// criterion 5

Outcome leverage_property() {
  const auto t0 = Clock::now();
  const ToolShape shape = generate_tool(0, 7, ToolConfig::T, DimRanges{}, wood(), steel());
  std::vector<double> impulses;
  for (double gy : {0.17, 0.13, 0.09, 0.05, 0.01}) {
    TaskEnv env = attached(Task::Hammer, shape, {0.0, gy});
    double impulse = 0.0;
    for (int s = 0; s < 60 && impulse == 0.0; ++s)
      for (const auto& c : step(env, {0.0, 0.0, kMaxStepRotation}).contacts)
        if (is_tool_target_contact(env, c)) impulse += c.impulse;
    impulses.push_back(impulse);
  }
  bool pass = impulses.front() > 0.0;
  std::string list;
  for (std::size_t i = 0; i < impulses.size(); ++i) {
    if (i > 0) pass = pass && impulses[i] >= impulses[i - 1];
    list += (i ? " " : "") + fmt("%.4g", impulses[i]);
  }
  return {pass, "impulses by increasing lever arm [" + list + "], " + fmt("%.1f", seconds_since(t0)) + " s"};
}

// criterion 6

Outcome mppi_sanity() {
  const auto t0 = Clock::now();
  const double oracle = toy::grid_oracle({}, 8, 40);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    worst = std::max(worst, toy::run_mppi({}, toy::toy_config(), 40, seed));

  auto cfg = toy::toy_config();
  cfg.sigma = Vec3::Zero();
  Plan base(cfg.horizon);
  for (int h = 0; h < cfg.horizon; ++h) base[h] = {0.001 * h, -0.0005 * h, 0.002 * h};
  const auto r = mppi_step(toy::PointMass{}, toy::reward, base, cfg, 3);
  bool exact = true;
  for (int h = 0; h < cfg.horizon; ++h)
    exact = exact && r.plan[h].dx == base[h].dx && r.plan[h].dy == base[h].dy && r.plan[h].dtheta == base[h].dtheta;

  const double dt = seconds_since(t0);
  const bool pass = oracle > 0.0 && worst <= 2.0 * oracle && exact && dt < 60.0;
  return {pass, "worst final error " + fmt("%.3e", worst) + " vs oracle " + fmt("%.3e", oracle) + ", sigma=0 exact " +
                    (exact ? "yes" : "no") + ", " + fmt("%.1f", dt) + " s"};
}

// criterion 7

Outcome rigged_convergence() {
  const auto t0 = Clock::now();
  int hits = 0, slowest = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int e = rigged::convergence_epoch(seed, 200);
    if (e >= 0) {
      ++hits;
      slowest = std::max(slowest, e);
    }
  }
  const double dt = seconds_since(t0);
  return {hits >= 19 && dt < 120.0, std::to_string(hits) + "/20 seeds, slowest epoch " + std::to_string(slowest) +
                                        ", " + fmt("%.1f", dt) + " s"};
}

// criteria 8-10

struct Pipeline {
  fs::path workdir;
  PipelineConfig cfg;
  ToolSet train, eval;
  double keypoint_seconds = 0.0;
  std::vector<ResultRow> rows;
  std::map<Task, std::vector<EpisodeRecord>> logs;  // every selector, concatenated
  std::map<Task, GraphModel> models;
  std::map<Task, TrainingSet> data;
  std::map<Task, double> seconds;

  static constexpr std::uint64_t kEvalSeed = 7;

  void prepare() {
    const auto t0 = Clock::now();
    train.tools = generate_tools(40, kConfigs, 1, 0);
    eval.tools = generate_tools(20, kConfigs, 2, 1000);
    KeypointObjectiveConfig kc;
    train.keypoints = compute_keypoints(train.tools, 8, kc);
    eval.keypoints = compute_keypoints(eval.tools, 8, kc);
    keypoint_seconds = seconds_since(t0);
    write_tools((workdir / "train_tools.json").string(), train.tools);
    write_tools((workdir / "eval_tools.json").string(), eval.tools);
    write_keypoints((workdir / "train_keypoints.json").string(), train.keypoints);
    write_keypoints((workdir / "eval_keypoints.json").string(), eval.keypoints);
  }

  void run(Task task) {
    const auto t0 = Clock::now();
    const TrainedTask tt = collect_and_train(task, train, eval, cfg);
    models[task] = tt.training.model;
    data[task] = tt.data;
    write_text((workdir / ("model_" + to_string(task) + ".json")).string(),
               model_to_json(tt.training.model, 8, cfg.train, tt.training.loss_history).dump() + "\n");
    write_text((workdir / ("manifest_" + to_string(task) + ".json")).string(),
               manifest_to_json(tt.manifest, tt.stats).dump(1) + "\n");

    const EvalResult ref = evaluate(task, Selector::Leverage, nullptr, eval, cfg.eval_episodes, kEvalSeed, cfg.episode);
    std::string log;
    for (Selector s : {Selector::Gift, Selector::Simple, Selector::GraspOpt, Selector::Leverage}) {
      EvalResult r = s == Selector::Leverage
                         ? ref
                         : evaluate(task, s, &tt.training.model, eval, cfg.eval_episodes, kEvalSeed, cfg.episode);
      normalize(r.metrics, ref.metrics);
      rows.push_back({to_string(s), task, r.metrics});
      for (const auto& rec : r.log) {
        Json j = record_to_json(rec);
        j["method"] = to_string(s);
        log += j.dump() + "\n";
      }
      auto& all = logs[task];
      all.insert(all.end(), r.log.begin(), r.log.end());
    }
    write_text((workdir / ("eval_log_" + to_string(task) + ".jsonl")).string(), log);
    write_report((workdir / "results.csv").string(), rows);
    seconds[task] = seconds_since(t0) + keypoint_seconds / 3.0;
  }

  const Metrics& metrics(Task task, const std::string& method) const {
    for (const auto& r : rows)
      if (r.task == task && r.method == method) return r.metrics;
    throw std::logic_error("no row " + method);
  }

  void render_examples() const {
    const auto it = models.find(Task::Hammer);
    if (it == models.end()) return;
    for (std::size_t t = 0; t < 4 && t < eval.tools.size(); ++t) {
      const auto& K = eval.keypoints[t].points;
      SvgOptions opt;
      opt.D = forward(it->second, build_graph(K, keypoint_normals(eval.tools[t], K)));
      write_svg((workdir / ("hammer_tool" + std::to_string(eval.tools[t].tool_id) + ".svg")).string(), eval.tools[t],
                K, opt);
      opt.top4 = true;
      write_svg((workdir / ("hammer_tool" + std::to_string(eval.tools[t].tool_id) + "_top4.svg")).string(),
                eval.tools[t], K, opt);
    }
  }
};

std::string gc_norm(const Metrics& m) {
  return m.gc_normalized_reward ? fmt("%.3f", *m.gc_normalized_reward) : std::string("n/a");
}

Outcome task_ordering(Pipeline& p, Task task) {
  p.run(task);
  const Metrics& gift = p.metrics(task, "gift");
  const Metrics& simple = p.metrics(task, "simple");
  const Metrics& opt = p.metrics(task, "grasp_opt");
  const Metrics& lev = p.metrics(task, "leverage");
  bool pass = gift.gc_normalized_reward && simple.gc_normalized_reward && opt.gc_normalized_reward &&
              *gift.gc_normalized_reward > *simple.gc_normalized_reward &&
              *gift.gc_normalized_reward > *opt.gc_normalized_reward;
  if (task == Task::Hammer)
    pass = pass && lev.gc_normalized_reward && *gift.gc_normalized_reward >= 0.9 * *lev.gc_normalized_reward;
  const double dt = p.seconds[task];
  pass = pass && dt < 1800.0;
  return {pass, to_string(task) + ": GC-normalized reward gift " + gc_norm(gift) + ", simple " + gc_norm(simple) +
                    ", grasp_opt " + gc_norm(opt) + ", leverage " + gc_norm(lev) + "; task success gift " +
                    fmt("%.3f", gift.task_success_rate) + ", leverage " + fmt("%.3f", lev.task_success_rate) + "; " +
                    fmt("%.0f", dt) + " s"};
}

// Same seeds as collect_and_train, different loss.
GraphModel retrain(const TrainingSet& data, const PipelineConfig& cfg, std::uint64_t seed, LossVariant loss) {
  TrainConfig tc = cfg.train;
  tc.loss = loss;
  tc.seed = derive_seed(seed, {0x7a11, static_cast<std::uint64_t>(Task::Hammer)});
  return train(init_model(data.graphs.front().feature_dim(), cfg.hidden, cfg.rounds, tc.seed), data, tc).model;
}

Outcome material_flip(Pipeline& p) {
  const auto t0 = Clock::now();
  const double ratio = steel().density / wood().density;
  const auto it = p.models.find(Task::Hammer);
  const FlipExperiment fe = flip_experiment(p.train, p.eval, p.cfg, it == p.models.end() ? nullptr : &it->second);
  const double dt = seconds_since(t0);

  // supplementary: the standard log-probability estimator on the same collected data
  const std::uint64_t second = derive_seed(p.cfg.seed, {0xf11b});
  const TrainingSet& original_data = fe.original ? fe.original->data : p.data.at(Task::Hammer);
  const GraphModel lo = retrain(original_data, p.cfg, p.cfg.seed, LossVariant::Log);
  const GraphModel lf = retrain(fe.flipped.data, p.cfg, second, LossVariant::Log);
  const GraphModel la = retrain(fe.control_a.data, p.cfg, p.cfg.seed, LossVariant::Log);
  const GraphModel lb = retrain(fe.control_b.data, p.cfg, second, LossVariant::Log);
  ToolSet ctrl_eval = p.eval;
  for (auto& t : ctrl_eval.tools) t = with_uniform_material(t, t.handle().material);
  const double log_flip = compare_inter_parts(lo, lf, p.eval).flip_fraction;
  const double log_control = compare_inter_parts(la, lb, ctrl_eval).flip_fraction;
  Json report;
  auto records = [](const FlipReport& r) {
    Json a = Json::array();
    for (const auto& x : r.records)
      a.push_back({{"tool_id", x.tool_id},
                   {"inter_part_before", to_string(x.inter_part_before)},
                   {"inter_part_after", to_string(x.inter_part_after)},
                   {"flipped", x.flipped}});
    return a;
  };
  report["density_ratio"] = ratio;
  report["flip_fraction"] = fe.flip.flip_fraction;
  report["control_fraction"] = fe.control.flip_fraction;
  report["flip"] = records(fe.flip);
  report["control"] = records(fe.control);
  report["log_loss_flip_fraction"] = log_flip;
  report["log_loss_control_fraction"] = log_control;
  write_text((p.workdir / "flip_report.json").string(), report.dump(1) + "\n");
  const bool pass = ratio >= 5.0 && fe.flip.flip_fraction >= 0.6 && fe.flip.flip_fraction > fe.control.flip_fraction &&
                    dt < 1800.0;
  return {pass, "density ratio " + fmt("%.1f", ratio) + ", flip fraction " + fmt("%.2f", fe.flip.flip_fraction) +
                    ", control " + fmt("%.2f", fe.control.flip_fraction) + ", " + fmt("%.0f", dt) +
                    " s; supplementary log loss on the same data: flip " + fmt("%.2f", log_flip) + ", control " +
                    fmt("%.2f", log_control)};
}

Outcome gating(const Pipeline& p) {
  long checked = 0, off_keypoint = 0, violations = 0;
  for (const auto& [task, log] : p.logs) {
    for (const auto& r : log) {
      if (!r.grasp_success) continue;
      ++checked;
      if (r.contact_keypoint < 0 || r.contact_keypoint == r.inter_idx) continue;
      ++off_keypoint;
      if (!r.gated || r.completion_sum != 0.0) ++violations;
    }
  }
  const bool pass = !p.logs.empty() && violations == 0;
  return {pass, std::to_string(off_keypoint) + " off-keypoint first contacts in " + std::to_string(checked) +
                    " grasped eval episodes, " + std::to_string(violations) + " with nonzero completion reward"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string workdir = "acceptance_work";
  std::vector<int> only;
  app.add_option("--workdir", workdir);
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);
  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << id << " [" << name << "]: " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ")"
              << std::endl;
  };

  report(1, "ot oracle equivalence", ot_equivalence);
  report(2, "gradient suite", gradient_suite);
  report(3, "keypoint objective", keypoint_objective);
  report(4, "physics invariants", physics_invariants);
  report(5, "leverage", leverage_property);
  report(6, "mppi sanity", mppi_sanity);
  report(7, "rigged convergence", rigged_convergence);

  Pipeline p;
  p.workdir = workdir;
  if (wanted(8) || wanted(9) || wanted(10)) {
    try {
      p.prepare();
    } catch (const std::exception& e) {
      std::cout << "pipeline setup failed: " << e.what() << std::endl;
    }
  }
  if (wanted(8)) {
    // one line per task; the criterion passes only if all three do
    std::vector<Outcome> per_task;
    for (Task task : {Task::Hook, Task::Reach, Task::Hammer}) {
      Outcome o;
      try {
        o = task_ordering(p, task);
      } catch (const std::exception& e) {
        o = {false, to_string(task) + ": exception: " + e.what()};
      }
      per_task.push_back(o);
    }
    bool all = true;
    std::string detail;
    for (const auto& o : per_task) {
      all = all && o.pass;
      detail += (detail.empty() ? "" : " | ") + o.detail;
    }
    failures += !all;
    std::cout << "criterion 8 [end-to-end ordering]: " << (all ? "PASS" : "FAIL") << " (" << detail << ")"
              << std::endl;
    try {
      p.render_examples();
    } catch (const std::exception& e) {
      std::cerr << "render failed: " << e.what() << "\n";
    }
  }
  report(9, "material flip", [&] { return material_flip(p); });
  report(10, "test-time gating", [&] {
    if (p.logs.empty()) return Outcome{false, "needs the criterion 8 eval logs"};
    return gating(p);
  });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
