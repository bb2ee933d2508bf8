#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gift/afford.hpp"
#include "gift/geom.hpp"
#include "gift/keypoints.hpp"
#include "gift/plan.hpp"
#include "gift/sim.hpp"

namespace gift {

/// Tool i gets config configs[i % size] and seed derive_seed(seed, {i});
/// ids run from first_id.
std::vector<ToolShape> generate_tools(int n, const std::vector<ToolConfig>& configs, std::uint64_t seed,
                                      int first_id = 0, const DimRanges& dims = {},
                                      const Material& handle = wood(), const Material& head = steel());

/// Keypoints per tool, optimized concurrently (seed per tool id).
std::vector<KeypointSet> compute_keypoints(const std::vector<ToolShape>& tools, int M,
                                           const KeypointObjectiveConfig& config);

/// Keypoints aligned index by index with their tools.
struct ToolSet {
  std::vector<ToolShape> tools;
  std::vector<KeypointSet> keypoints;

  void validate() const;
  std::vector<int> ids() const;
};

struct DatasetManifest {
  Task task = Task::Hammer;
  std::vector<int> train_tools, eval_tools;
  int episodes_per_tool = 0;
  int eval_episodes = 0;
  std::uint64_t seed = 0;
  std::string config_hash;

  /// Throws ValidationError when the train and eval sets share a tool id.
  void validate() const;
};

struct CollectStats {
  int episodes = 0;
  int grasp_failures = 0;
  int blowups = 0;
  long failed_rollouts = 0;
};

struct CollectResult {
  std::vector<ExperienceTuple> tuples;  // tool order, then episode order
  CollectStats stats;
};

/// Uniform (grasp_idx, provisional inter_idx) for episode e of a tool.
std::pair<int, int> collect_indices(std::uint64_t seed, int tool_id, int episode, int M);

/// Uniform grasp and provisional interaction indices, train-mode episodes.
/// Episode e of tool t uses derive_seed(seed, {t, e}). Episodes that blow up
/// are dropped; more than half blowing up throws SimulationError.
CollectResult collect(Task task, const ToolSet& tools, int episodes_per_tool, std::uint64_t seed,
                      const EpisodeConfig& cfg);

struct EpisodeRecord {
  int tool_id = 0;
  int episode = 0;
  int grasp_idx = 0;
  int inter_idx = 0;
  bool grasp_success = false;
  bool task_success = false;
  bool touched = false;
  bool gated = false;
  int contact_keypoint = -1;  // keypoint nearest the first contact, -1 without contact
  double reward = 0.0;
  double completion_sum = 0.0;
};

struct Metrics {
  int n_episodes = 0;
  int n_grasp_success = 0;
  double task_success_rate = 0.0;
  double mean_reward = 0.0;
  double grasp_success_rate = 0.0;
  double gc_task_success = 0.0;
  double gc_mean_reward = 0.0;
  std::optional<double> normalized_reward;
  std::optional<double> gc_normalized_reward;
};

/// Aggregates a raw episode log. GC fields use grasp-success episodes only
/// and are 0 when there are none.
Metrics compute_metrics(const std::vector<EpisodeRecord>& log);

/// Fills the normalized fields; each is left empty when the reference mean
/// is not positive.
void normalize(Metrics& m, const Metrics& reference);

struct EvalResult {
  Metrics metrics;
  std::vector<EpisodeRecord> log;
};

/// Eval-mode episodes with test-time gating. Episode k runs on tool
/// k % n_tools with seed derive_seed(seed, {k}); every selector sees the same
/// episode seeds. `model` is required for Selector::Gift.
EvalResult evaluate(Task task, Selector selector, const GraphModel* model, const ToolSet& tools, int n_episodes,
                    std::uint64_t seed, const EpisodeConfig& cfg, const Metrics* reference = nullptr);

struct ResultRow {
  std::string method;
  Task task = Task::Hammer;
  Metrics metrics;
};

/// CSV with 6 significant digits, rows sorted by (task, method).
std::string report_csv(std::vector<ResultRow> rows);
std::vector<ResultRow> parse_report(const std::string& csv);
void write_report(const std::string& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_report(const std::string& path);

/// Swaps head and handle materials; geometry is untouched.
ToolShape flip_materials(const ToolShape& shape);
std::vector<ToolShape> flip_materials(const std::vector<ToolShape>& tools);
/// Both parts get `material`.
ToolShape with_uniform_material(const ToolShape& shape, const Material& material);

struct PipelineConfig {
  int episodes_per_tool = 50;  // 40 train tools -> 2000 episodes
  int eval_episodes = 200;
  EpisodeConfig episode;
  TrainConfig train;
  int hidden = 32;
  int rounds = 3;
  std::uint64_t seed = 0;
};

/// Collects on the train tools and trains a fresh model.
struct TrainedTask {
  DatasetManifest manifest;
  CollectStats stats;
  TrainingSet data;
  TrainResult training;
};

TrainedTask collect_and_train(Task task, const ToolSet& train_tools, const ToolSet& eval_tools,
                              const PipelineConfig& cfg);

struct FlipRecord {
  int tool_id = 0;
  PartLabel inter_part_before = PartLabel::Head;
  PartLabel inter_part_after = PartLabel::Head;
  bool flipped = false;
};

struct FlipReport {
  std::vector<FlipRecord> records;
  double flip_fraction = 0.0;
};

/// Part of the greedy interaction keypoint under each model, per eval tool.
FlipReport compare_inter_parts(const GraphModel& before, const GraphModel& after, const ToolSet& eval_tools);

struct FlipExperiment {
  FlipReport flip;     // original materials vs swapped materials
  FlipReport control;  // identical materials on both parts in both runs
  std::optional<TrainedTask> original;  // empty when a baseline model was supplied
  TrainedTask flipped, control_a, control_b;
};

/// Hammer only. Both arms train twice: once with cfg.seed and once with a
/// derived seed, so the control differs from the main run only in materials.
/// `baseline` optionally supplies the already-trained original-material model.
FlipExperiment flip_experiment(const ToolSet& train_tools, const ToolSet& eval_tools, const PipelineConfig& cfg,
                               const GraphModel* baseline = nullptr);

}  // namespace gift
