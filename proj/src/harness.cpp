#include "gift/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "gift/io.hpp"
#include "gift/parallel.hpp"
#include "gift/rng.hpp"

namespace gift {

std::vector<ToolShape> generate_tools(int n, const std::vector<ToolConfig>& configs, std::uint64_t seed, int first_id,
                                      const DimRanges& dims, const Material& handle, const Material& head) {
  if (n < 0) throw ValidationError("generate_tools: n must be >= 0");
  if (configs.empty()) throw ValidationError("generate_tools: no configs");
  std::vector<ToolShape> out(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    out[i] = generate_tool(first_id + static_cast<int>(i), derive_seed(seed, {i}), configs[i % configs.size()], dims,
                           handle, head);
  });
  return out;
}

std::vector<KeypointSet> compute_keypoints(const std::vector<ToolShape>& tools, int M,
                                           const KeypointObjectiveConfig& config) {
  std::vector<KeypointSet> out(tools.size());
  parallel_for(tools.size(), [&](std::size_t i) {
    KeypointObjectiveConfig c = config;
    c.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(tools[i].tool_id)});
    out[i] = optimize_keypoints(tools[i], M, c);
  });
  return out;
}

void ToolSet::validate() const {
  if (tools.size() != keypoints.size()) throw ValidationError("tool set: keypoints not aligned with tools");
  for (std::size_t i = 0; i < tools.size(); ++i)
    if (tools[i].tool_id != keypoints[i].tool_id) throw ValidationError("tool set: tool id mismatch");
}

std::vector<int> ToolSet::ids() const {
  std::vector<int> out;
  for (const auto& t : tools) out.push_back(t.tool_id);
  return out;
}

void DatasetManifest::validate() const {
  const std::set<int> train(train_tools.begin(), train_tools.end());
  for (int id : eval_tools)
    if (train.count(id)) throw ValidationError("manifest: tool " + std::to_string(id) + " is in both splits");
}

std::pair<int, int> collect_indices(std::uint64_t seed, int tool_id, int episode, int M) {
  Rng rng = make_rng(seed, {static_cast<std::uint64_t>(tool_id), static_cast<std::uint64_t>(episode), 0});
  std::uniform_int_distribution<int> pick(0, M - 1);
  const int g = pick(rng);
  return {g, pick(rng)};
}

CollectResult collect(Task task, const ToolSet& tools, int episodes_per_tool, std::uint64_t seed,
                      const EpisodeConfig& cfg) {
  tools.validate();
  if (episodes_per_tool < 0) throw ValidationError("collect: episodes must be >= 0");
  EpisodeConfig ec = cfg;
  ec.record = false;
  ec.mppi.threads = 1;
  const std::size_t per = static_cast<std::size_t>(episodes_per_tool);
  const std::size_t n = tools.tools.size() * per;
  std::vector<ExperienceTuple> tuples(n);
  std::vector<char> blew(n, 0);
  std::vector<int> failed(n, 0);
  parallel_for(n, [&](std::size_t k) {
    const ToolShape& shape = tools.tools[k / per];
    const KeypointSet& K = tools.keypoints[k / per];
    const std::uint64_t s = derive_seed(seed, {static_cast<std::uint64_t>(shape.tool_id), k % per});
    const auto [g, i] = collect_indices(seed, shape.tool_id, static_cast<int>(k % per), K.size());
    try {
      Episode ep = rollout_episode(shape, K, g, i, task, ec, Mode::Train, derive_seed(s, {1}));
      tuples[k] = std::move(ep.tuple);
      failed[k] = ep.failed_rollouts;
    } catch (const SimulationError&) {
      blew[k] = 1;
    } catch (const DivergenceError&) {
      blew[k] = 1;
    }
  });
  CollectResult out;
  out.stats.episodes = static_cast<int>(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.stats.failed_rollouts += failed[k];
    if (blew[k]) {
      ++out.stats.blowups;
      continue;
    }
    if (!tuples[k].grasp_success) ++out.stats.grasp_failures;
    out.tuples.push_back(std::move(tuples[k]));
  }
  if (n > 0 && 2 * out.stats.blowups > static_cast<int>(n)) {
    std::ostringstream msg;
    msg << "collect: " << out.stats.blowups << " of " << n << " episodes blew up (task " << to_string(task) << ")";
    throw SimulationError(msg.str());
  }
  return out;
}

Metrics compute_metrics(const std::vector<EpisodeRecord>& log) {
  Metrics m;
  m.n_episodes = static_cast<int>(log.size());
  double success = 0, reward = 0, gc_success = 0, gc_reward = 0;
  for (const auto& r : log) {
    success += r.task_success;
    reward += r.reward;
    if (!r.grasp_success) continue;
    ++m.n_grasp_success;
    gc_success += r.task_success;
    gc_reward += r.reward;
  }
  if (m.n_episodes > 0) {
    m.task_success_rate = success / m.n_episodes;
    m.mean_reward = reward / m.n_episodes;
    m.grasp_success_rate = static_cast<double>(m.n_grasp_success) / m.n_episodes;
  }
  if (m.n_grasp_success > 0) {
    m.gc_task_success = gc_success / m.n_grasp_success;
    m.gc_mean_reward = gc_reward / m.n_grasp_success;
  }
  return m;
}

void normalize(Metrics& m, const Metrics& reference) {
  m.normalized_reward.reset();
  m.gc_normalized_reward.reset();
  if (reference.mean_reward > 0.0) m.normalized_reward = m.mean_reward / reference.mean_reward;
  if (reference.gc_mean_reward > 0.0) m.gc_normalized_reward = m.gc_mean_reward / reference.gc_mean_reward;
}

EvalResult evaluate(Task task, Selector selector, const GraphModel* model, const ToolSet& tools, int n_episodes,
                    std::uint64_t seed, const EpisodeConfig& cfg, const Metrics* reference) {
  tools.validate();
  if (tools.tools.empty()) throw ValidationError("evaluate: no tools");
  if (n_episodes < 0) throw ValidationError("evaluate: episodes must be >= 0");
  if (selector == Selector::Gift && !model) throw ValidationError("evaluate: gift selector needs a model");
  EpisodeConfig ec = cfg;
  ec.record = true;
  ec.mppi.threads = 1;

  // Deterministic selectors are evaluated once per tool.
  std::vector<Selection> fixed(tools.tools.size());
  if (selector == Selector::Gift || selector == Selector::Leverage) {
    for (std::size_t t = 0; t < tools.tools.size(); ++t) {
      const auto& K = tools.keypoints[t].points;
      fixed[t] = selector == Selector::Gift ? gift_select(*model, tools.tools[t], K, ec.gripper)
                                            : baseline_leverage(tools.tools[t], K, 0, ec.gripper);
    }
  }

  EvalResult out;
  out.log.resize(n_episodes);
  std::vector<char> blew(n_episodes, 0);
  parallel_for(static_cast<std::size_t>(n_episodes), [&](std::size_t k) {
    const std::size_t t = k % tools.tools.size();
    const ToolShape& shape = tools.tools[t];
    const KeypointSet& K = tools.keypoints[t];
    const std::uint64_t s = derive_seed(seed, {k});
    Selection sel;
    switch (selector) {
      case Selector::Gift:
      case Selector::Leverage: sel = fixed[t]; break;
      case Selector::Simple: sel = baseline_simple(shape, K.points, derive_seed(s, {1}), ec.gripper); break;
      case Selector::GraspOpt: sel = baseline_grasp_opt(shape, K.points, derive_seed(s, {1}), ec.gripper); break;
    }
    EpisodeRecord& r = out.log[k];
    r.tool_id = shape.tool_id;
    r.episode = static_cast<int>(k);
    r.grasp_idx = sel.grasp_idx;
    r.inter_idx = sel.inter_idx;
    try {
      const Episode ep =
          rollout_with_grasp(shape, K, sel.grasp, sel.grasp_idx, sel.inter_idx, task, ec, Mode::Eval, derive_seed(s, {2}));
      r.grasp_success = ep.tuple.grasp_success;
      r.task_success = ep.tuple.task_success;
      r.reward = ep.tuple.reward;
      r.touched = ep.touched;
      r.gated = ep.gated;
      r.completion_sum = ep.completion_sum;
      if (const auto c = first_contact_local(ep.trajectory)) r.contact_keypoint = nearest_keypoint(K.points, *c);
    } catch (const SimulationError&) {
      blew[k] = 1;
    }
  });
  int blowups = 0;
  for (char b : blew) blowups += b;
  if (n_episodes > 0 && 2 * blowups > n_episodes)
    throw SimulationError("evaluate: " + std::to_string(blowups) + " of " + std::to_string(n_episodes) +
                          " episodes blew up");
  out.metrics = compute_metrics(out.log);
  if (reference) normalize(out.metrics, *reference);
  return out;
}

namespace {

const char* kReportHeader =
    "method,task,task_success,mean_reward,norm_reward,grasp_success,gc_task_success,gc_mean_reward,gc_norm_reward,"
    "n_episodes";

std::string num(double x) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(6) << x;
  return s.str();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_num(const std::string& s) {
  std::istringstream in(s);
  in.imbue(std::locale::classic());
  double x = 0.0;
  if (!(in >> x)) throw ValidationError("report: bad number '" + s + "'");
  return x;
}

}  // namespace

std::string report_csv(std::vector<ResultRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::make_pair(to_string(a.task), a.method) < std::make_pair(to_string(b.task), b.method);
  });
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& r : rows) {
    const Metrics& m = r.metrics;
    auto opt = [](const std::optional<double>& x) { return x ? num(*x) : std::string(); };
    out += r.method + "," + to_string(r.task) + "," + num(m.task_success_rate) + "," + num(m.mean_reward) + "," +
           opt(m.normalized_reward) + "," + num(m.grasp_success_rate) + "," + num(m.gc_task_success) + "," +
           num(m.gc_mean_reward) + "," + opt(m.gc_normalized_reward) + "," + std::to_string(m.n_episodes) + "\n";
  }
  return out;
}

std::vector<ResultRow> parse_report(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) throw ValidationError("report: unexpected header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 10) throw ValidationError("report: expected 10 columns");
    ResultRow r;
    r.method = c[0];
    r.task = parse_task(c[1]);
    Metrics& m = r.metrics;
    m.task_success_rate = parse_num(c[2]);
    m.mean_reward = parse_num(c[3]);
    if (!c[4].empty()) m.normalized_reward = parse_num(c[4]);
    m.grasp_success_rate = parse_num(c[5]);
    m.gc_task_success = parse_num(c[6]);
    m.gc_mean_reward = parse_num(c[7]);
    if (!c[8].empty()) m.gc_normalized_reward = parse_num(c[8]);
    m.n_episodes = static_cast<int>(parse_num(c[9]));
    m.n_grasp_success = static_cast<int>(std::lround(m.grasp_success_rate * m.n_episodes));
    rows.push_back(r);
  }
  return rows;
}

void write_report(const std::string& path, const std::vector<ResultRow>& rows) { write_text(path, report_csv(rows)); }

std::vector<ResultRow> read_report(const std::string& path) { return parse_report(read_text(path)); }

ToolShape flip_materials(const ToolShape& shape) {
  ToolShape out = shape;
  std::swap(out.parts[0].material, out.parts[1].material);
  return out;
}

std::vector<ToolShape> flip_materials(const std::vector<ToolShape>& tools) {
  std::vector<ToolShape> out;
  for (const auto& t : tools) out.push_back(flip_materials(t));
  return out;
}

ToolShape with_uniform_material(const ToolShape& shape, const Material& material) {
  ToolShape out = shape;
  out.parts[0].material = material;
  out.parts[1].material = material;
  return out;
}

TrainedTask collect_and_train(Task task, const ToolSet& train_tools, const ToolSet& eval_tools,
                              const PipelineConfig& cfg) {
  TrainedTask out;
  out.manifest.task = task;
  out.manifest.train_tools = train_tools.ids();
  out.manifest.eval_tools = eval_tools.ids();
  out.manifest.episodes_per_tool = cfg.episodes_per_tool;
  out.manifest.eval_episodes = cfg.eval_episodes;
  out.manifest.seed = cfg.seed;
  out.manifest.config_hash = config_hash(episode_config_to_json(cfg.episode));
  out.manifest.validate();

  const std::uint64_t collect_seed = derive_seed(cfg.seed, {0xc011, static_cast<std::uint64_t>(task)});
  CollectResult data = collect(task, train_tools, cfg.episodes_per_tool, collect_seed, cfg.episode);
  out.stats = data.stats;
  out.data = make_training_set(data.tuples);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, {0x7a11, static_cast<std::uint64_t>(task)});
  const int in_dim = out.data.graphs.empty() ? 5 : out.data.graphs.front().feature_dim();
  out.training = train(init_model(in_dim, cfg.hidden, cfg.rounds, tc.seed), out.data, tc);
  return out;
}

FlipReport compare_inter_parts(const GraphModel& before, const GraphModel& after, const ToolSet& eval_tools) {
  eval_tools.validate();
  FlipReport rep;
  int flips = 0;
  for (std::size_t t = 0; t < eval_tools.tools.size(); ++t) {
    const ToolShape& shape = eval_tools.tools[t];
    const auto& K = eval_tools.keypoints[t].points;
    const auto normals = keypoint_normals(shape, K);
    const KeypointGraph g = build_graph(K, normals);
    const int a = select_pair(forward(before, g), SelectMode::Greedy).second;
    const int b = select_pair(forward(after, g), SelectMode::Greedy).second;
    FlipRecord r;
    r.tool_id = shape.tool_id;
    r.inter_part_before = shape.parts[part_at(shape, K[a])].label;
    r.inter_part_after = shape.parts[part_at(shape, K[b])].label;
    r.flipped = r.inter_part_before != r.inter_part_after;
    flips += r.flipped;
    rep.records.push_back(r);
  }
  rep.flip_fraction = rep.records.empty() ? 0.0 : static_cast<double>(flips) / rep.records.size();
  return rep;
}

FlipExperiment flip_experiment(const ToolSet& train_tools, const ToolSet& eval_tools, const PipelineConfig& cfg,
                               const GraphModel* baseline) {
  auto remat = [](const ToolSet& ts, auto&& f) {
    ToolSet out = ts;
    for (auto& t : out.tools) t = f(t);
    return out;
  };
  PipelineConfig second = cfg;
  second.seed = derive_seed(cfg.seed, {0xf11b});

  FlipExperiment out;
  if (!baseline) out.original = collect_and_train(Task::Hammer, train_tools, eval_tools, cfg);
  const GraphModel& original = baseline ? *baseline : out.original->training.model;
  auto flip = [](const ToolShape& s) { return flip_materials(s); };
  out.flipped = collect_and_train(Task::Hammer, remat(train_tools, flip), remat(eval_tools, flip), second);
  out.flip = compare_inter_parts(original, out.flipped.training.model, eval_tools);

  auto same = [](const ToolShape& s) { return with_uniform_material(s, s.handle().material); };
  const ToolSet ctrl_train = remat(train_tools, same), ctrl_eval = remat(eval_tools, same);
  out.control_a = collect_and_train(Task::Hammer, ctrl_train, ctrl_eval, cfg);
  out.control_b = collect_and_train(Task::Hammer, ctrl_train, ctrl_eval, second);
  out.control = compare_inter_parts(out.control_a.training.model, out.control_b.training.model, ctrl_eval);
  return out;
}

}  // namespace gift
