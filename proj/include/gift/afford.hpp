#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gift/geom.hpp"
#include "gift/plan.hpp"

namespace gift {

/// Keypoint graph: one feature row per node and directed 3-NN edges.
struct KeypointGraph {
  Eigen::MatrixXd features;                 // M x F
  std::vector<std::array<int, 3>> neighbors;  // out-edges per node

  int size() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
};

/// Node features in decimeters relative to the keypoint centroid:
/// [x, y, |x|, n_x, n_y], plus a material scalar column when `material` is
/// given. Missing normals are zero. Throws on M < 4 or duplicate keypoints.
KeypointGraph build_graph(const std::vector<Vec2>& K, const std::vector<Vec2>& normals = {},
                          const std::vector<double>& material = {});

/// M x M matrix of pair probabilities, rows grasp, columns interaction.
using PairDistribution = Eigen::MatrixXd;

/// Message-passing network with all weights in one flat vector.
/// Round r: H' = tanh(H Ws^T + mean_nbr(H) Wn^T + b). Readout g = mean(H_L).
/// Pair score s_ij = u_g.h_i + u_i.h_j + u_0.g + c.
struct GraphModel {
  int in_dim = 5;
  int hidden = 32;
  int rounds = 3;
  Eigen::VectorXd theta;

  struct Block {
    std::string name;
    int rows = 0, cols = 0;
    Eigen::Index offset = 0;
  };

  /// Named dense arrays in storage order (column-major within a block).
  std::vector<Block> blocks() const;
  Eigen::Index parameter_count() const;
  std::string arch_hash() const;
  void validate() const;
};

/// Glorot-uniform initialization.
GraphModel init_model(int in_dim, int hidden, int rounds, std::uint64_t seed);

/// Throws ValidationError on non-finite weights or a feature-width mismatch.
PairDistribution forward(const GraphModel& model, const KeypointGraph& graph);

enum class LossVariant { Paper, Log };
std::string to_string(LossVariant v);
LossVariant parse_loss_variant(const std::string& s);

struct TrainingExample {
  int graph = 0;  // index into TrainingSet::graphs
  int grasp_idx = 0;
  int inter_idx = 0;
  double reward = 0.0;
};

struct TrainingSet {
  std::vector<KeypointGraph> graphs;
  std::vector<TrainingExample> examples;
  int skipped_diagonal = 0;  // tuples with grasp_idx == inter_idx
  int skipped_failed = 0;    // tuples whose grasp failed
};

/// Graphs are shared between tuples with identical keypoints. Tuples whose
/// grasp failed or whose contact landed on the grasp keypoint are dropped.
TrainingSet make_training_set(const std::vector<ExperienceTuple>& tuples);

struct LossResult {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// Sum over `batch` of -D(g, i) R (paper) or -log D(g, i) R (log), with
/// rewards divided by `reward_scale`. Throws on out-of-range or diagonal
/// indices.
LossResult reinforce_loss(const GraphModel& model, const TrainingSet& data, const std::vector<int>& batch,
                          LossVariant variant, double reward_scale = 1.0);

struct TrainConfig {
  double lr = 3e-4;
  int epochs = 700;
  int batch_size = 256;
  std::uint64_t seed = 0;
  LossVariant loss = LossVariant::Paper;
  bool normalize_rewards = true;  // divide by the running max |R|
  int checkpoint_every = 50;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  void validate() const;
};

struct Checkpoint {
  int epoch = 0;
  GraphModel model;
};

struct TrainResult {
  GraphModel model;
  std::vector<double> loss_history;  // mean per-example loss per epoch
  std::vector<Checkpoint> checkpoints;
};

/// Raised when the loss turns non-finite; carries the last checkpointed model.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, Checkpoint last_good)
      : DivergenceError(what), last_good(std::move(last_good)) {}
  Checkpoint last_good;
};

using EpochCallback = std::function<void(int epoch, const GraphModel& model)>;

/// Adam over shuffled minibatches. Deterministic for a fixed seed.
TrainResult train(GraphModel model, const TrainingSet& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

enum class SelectMode { Greedy, Sample };

/// Greedy: argmax, lowest row-major index on ties. Sample: categorical draw.
std::pair<int, int> select_pair(const PairDistribution& D, SelectMode mode, std::uint64_t seed = 0);

/// Throws ValidationError unless D is square, non-negative and sums to 1.
void validate_distribution(const PairDistribution& D, double tol = 1e-9);

enum class Selector { Gift, Simple, GraspOpt, Leverage };
std::string to_string(Selector s);
Selector parse_selector(const std::string& s);

struct Selection {
  GraspResult grasp;
  int grasp_idx = 0;  // selected grasp keypoint, or the keypoint nearest the grasp
  int inter_idx = 0;
};

/// margin / friction_angle - gap / width
double stability_score(const ToolShape& shape, int i, int j, const GripperSpec& gripper);

/// Every antipodal pair on the whole tool.
std::vector<std::pair<int, int>> all_antipodal_pairs(const ToolShape& shape, const GripperSpec& gripper);

Selection baseline_simple(const ToolShape& shape, const std::vector<Vec2>& K, std::uint64_t seed,
                          const GripperSpec& gripper = {});
Selection baseline_grasp_opt(const ToolShape& shape, const std::vector<Vec2>& K, std::uint64_t seed,
                             const GripperSpec& gripper = {});
Selection baseline_leverage(const ToolShape& shape, const std::vector<Vec2>& K, std::uint64_t seed,
                            const GripperSpec& gripper = {});

/// Greedy pair from the model, grasp planned at the selected keypoint.
Selection gift_select(const GraphModel& model, const ToolShape& shape, const std::vector<Vec2>& K,
                      const GripperSpec& gripper = {});

int farthest_keypoint(const std::vector<Vec2>& K, const Vec2& x);

}  // namespace gift
