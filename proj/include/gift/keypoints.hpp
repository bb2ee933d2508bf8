#pragma once

#include <cstdint>
#include <vector>

#include "gift/geom.hpp"
#include "gift/ot.hpp"

namespace gift {

struct KeypointSet {
  int tool_id = 0;
  std::vector<Vec2> points;  // tool frame, sorted by outline arc position
  std::vector<double> loss_trace;

  int size() const { return static_cast<int>(points.size()); }
};

enum class SpreadTerm { Coverage, Separation };

struct KeypointObjectiveConfig {
  double lambda_coverage = -1.0;  // < 0 selects auto-balancing
  int steps = 150;
  double lr = 0.01;  // largest per-step keypoint move, fraction of bbox diagonal
  std::uint64_t seed = 0;
  double epsilon = 0.0;  // forwarded to sinkhorn; <= 0 selects the default
  SpreadTerm spread = SpreadTerm::Coverage;
  double separation_threshold = 0.25;  // fraction of bbox diagonal
  /// Auto-balancing target: the spread term at initialization is weighted to
  /// equal the quadric error of every keypoint sitting this far (fraction of
  /// bbox diagonal) off its supporting line.
  double balance_offset = 0.01;
  int init_starts = 8;  // farthest-point initializations tried; the lowest total loss is kept

  void validate() const;
};

/// Softmax of negative Euclidean distance from x to every boundary sample.
Eigen::VectorXd induced_distribution(const ToolShape& shape, const Vec2& x);

/// Mean of the induced distributions of all keypoints.
DiscreteDistribution keypoint_distribution(const ToolShape& shape, const std::vector<Vec2>& K);

struct CoverageEvaluation {
  double loss = 0.0;
  std::vector<Vec2> grad;
  TransportResult transport;
};

/// Entropic OT value between the keypoint-induced distribution and the
/// uniform distribution over boundary samples, geodesic ground cost. The
/// gradient uses the Sinkhorn potential f with the analytic softmax Jacobian.
/// Throws DivergenceError if Sinkhorn does not converge.
CoverageEvaluation coverage(const ToolShape& shape, const std::vector<Vec2>& K, double epsilon = 0.0,
                            int max_iter = 20000, double tol = 1e-11, const Eigen::VectorXd* warm_g = nullptr);
double coverage_loss(const ToolShape& shape, const std::vector<Vec2>& K, double epsilon = 0.0);
std::vector<Vec2> coverage_grad(const ToolShape& shape, const std::vector<Vec2>& K, double epsilon = 0.0);

/// sum_i x_i^T Q_{nearest(x_i)} x_i in homogeneous coordinates.
double quadric_loss(const ToolShape& shape, const std::vector<Vec2>& K);
/// 2 (Q x)_{xy} per keypoint, nearest-sample assignment held fixed.
std::vector<Vec2> quadric_grad(const ToolShape& shape, const std::vector<Vec2>& K);

/// sum_{i<j} max(0, threshold - |x_i - x_j|)^2
double separation_loss(const std::vector<Vec2>& K, double threshold);
std::vector<Vec2> separation_grad(const std::vector<Vec2>& K, double threshold);

/// Geodesic farthest-point sampling over boundary samples; returns indices.
std::vector<int> farthest_point_indices(const ToolShape& shape, int M, int start);

struct KeypointOptimization {
  KeypointSet keypoints;
  double lambda = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double mean_offset_before_projection = 0.0;  // mean distance to the outline
  std::vector<Vec2> unprojected;
};

/// Farthest-point initialization (best of init_starts evenly spaced starts
/// from a seeded offset), then backtracking gradient descent on
/// quadric + lambda * spread (a step is accepted only if the total loss does
/// not increase), then projection onto the outline and arc-length sort.
KeypointOptimization optimize_keypoints_detailed(const ToolShape& shape, int M, const KeypointObjectiveConfig& config);
KeypointSet optimize_keypoints(const ToolShape& shape, int M, const KeypointObjectiveConfig& config);

/// Outward normal of the boundary sample nearest each keypoint.
std::vector<Vec2> keypoint_normals(const ToolShape& shape, const std::vector<Vec2>& K);

}  // namespace gift
