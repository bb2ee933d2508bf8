#pragma once

#include <vector>

#include <Eigen/Core>

namespace gift {

/// Nonnegative weights summing to one.
struct DiscreteDistribution {
  Eigen::VectorXd weights;

  static DiscreteDistribution uniform(int n);
  /// Throws ValidationError unless weights are >= 0 and sum to 1 within 1e-12.
  void validate() const;
  int size() const { return static_cast<int>(weights.size()); }
};

struct SinkhornOptions {
  double epsilon = 0.0;  // <= 0 selects 0.05 * mean(cost)
  int max_iter = 500;
  double tol = 1e-9;  // L1 row-marginal violation
  /// Epsilon scaling: warm-started stages at geometrically decreasing
  /// epsilon down to the target. Each stage has its own max_iter budget;
  /// `iterations` reports the final stage. Skipped when warm-started.
  bool anneal = true;
};

struct TransportResult {
  double cost = 0.0;       // <plan, cost>, without the entropic term
  double objective = 0.0;  // <f, mu> + <g, nu>: the entropic OT value
  Eigen::MatrixXd plan;
  Eigen::VectorXd f, g;  // dual potentials
  int iterations = 0;
  bool converged = false;
  double epsilon = 0.0;
};

double default_epsilon(const Eigen::MatrixXd& cost);

/// Log-domain Sinkhorn. The plan is P_ij = mu_i nu_j exp((f_i + g_j - C_ij)/eps),
/// so `objective` is differentiable in mu with gradient f (up to a constant).
/// `warm_f`/`warm_g` seed the potentials when sizes match. Non-convergence
/// within max_iter is reported through `converged`, not thrown.
TransportResult sinkhorn(const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                         const Eigen::MatrixXd& cost, const SinkhornOptions& options = {},
                         const Eigen::VectorXd* warm_g = nullptr);

/// Exact optimal transport cost via successive shortest paths on the
/// transportation network. Small instances only (N <= 64 per side).
double exact_emd(const DiscreteDistribution& mu, const DiscreteDistribution& nu, const Eigen::MatrixXd& cost);

}  // namespace gift
