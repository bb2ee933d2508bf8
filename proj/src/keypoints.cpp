#include "gift/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gift/rng.hpp"

namespace gift {

void KeypointObjectiveConfig::validate() const {
  if (steps < 1) throw ValidationError("keypoint optimizer needs steps >= 1");
  if (!(lr > 0.0)) throw ValidationError("keypoint optimizer needs lr > 0");
  if (separation_threshold <= 0.0) throw ValidationError("separation threshold must be > 0");
  if (init_starts < 1) throw ValidationError("keypoint optimizer needs init_starts >= 1");
}

Eigen::VectorXd induced_distribution(const ToolShape& shape, const Vec2& x) {
  if (!x.allFinite()) throw ValidationError("keypoint is not finite");
  const int n = shape.size();
  Eigen::VectorXd logits(n);
  for (int v = 0; v < n; ++v) logits[v] = -(x - shape.boundary[v].point).norm();
  const double mx = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - mx).exp();
  return p / p.sum();
}

DiscreteDistribution keypoint_distribution(const ToolShape& shape, const std::vector<Vec2>& K) {
  if (K.empty()) throw ValidationError("keypoint set is empty");
  DiscreteDistribution d;
  d.weights = Eigen::VectorXd::Zero(shape.size());
  for (const auto& x : K) d.weights += induced_distribution(shape, x);
  d.weights /= static_cast<double>(K.size());
  d.weights /= d.weights.sum();
  return d;
}

CoverageEvaluation coverage(const ToolShape& shape, const std::vector<Vec2>& K, double epsilon, int max_iter,
                            double tol, const Eigen::VectorXd* warm_g) {
  const auto mu = keypoint_distribution(shape, K);
  const auto nu = DiscreteDistribution::uniform(shape.size());
  SinkhornOptions opt;
  opt.epsilon = epsilon > 0.0 ? epsilon : default_epsilon(shape.geodesic);
  opt.max_iter = max_iter;
  opt.tol = tol;

  CoverageEvaluation out;
  out.transport = sinkhorn(mu, nu, shape.geodesic, opt, warm_g);
  if (!out.transport.converged) throw DivergenceError("coverage: sinkhorn did not converge");
  out.loss = out.transport.objective;

  // dL/dx_i = (1/M) sum_v f_v dP_{x_i}(v)/dx_i, with the softmax Jacobian
  // dP_v/dx = -P_v (f_v - <P, f>) * (x - v)/|x - v| summed over v.
  const Eigen::VectorXd& f = out.transport.f;
  const double inv_m = 1.0 / static_cast<double>(K.size());
  out.grad.resize(K.size());
  for (std::size_t i = 0; i < K.size(); ++i) {
    const Eigen::VectorXd P = induced_distribution(shape, K[i]);
    const double fbar = P.dot(f);
    Vec2 g = Vec2::Zero();
    for (int v = 0; v < shape.size(); ++v) {
      const Vec2 d = K[i] - shape.boundary[v].point;
      const double len = d.norm();
      if (len <= 0.0) continue;
      g -= P[v] * (f[v] - fbar) * d / len;
    }
    out.grad[i] = inv_m * g;
  }
  return out;
}

double coverage_loss(const ToolShape& shape, const std::vector<Vec2>& K, double epsilon) {
  return coverage(shape, K, epsilon).loss;
}

std::vector<Vec2> coverage_grad(const ToolShape& shape, const std::vector<Vec2>& K, double epsilon) {
  return coverage(shape, K, epsilon).grad;
}

double quadric_loss(const ToolShape& shape, const std::vector<Vec2>& K) {
  double loss = 0.0;
  for (const auto& x : K) {
    const Eigen::Vector3d h(x.x(), x.y(), 1.0);
    loss += h.dot(shape.quadrics[nearest_boundary(shape, x)] * h);
  }
  return loss;
}

std::vector<Vec2> quadric_grad(const ToolShape& shape, const std::vector<Vec2>& K) {
  std::vector<Vec2> g;
  g.reserve(K.size());
  for (const auto& x : K) {
    const Eigen::Vector3d h(x.x(), x.y(), 1.0);
    const Eigen::Vector3d qh = shape.quadrics[nearest_boundary(shape, x)] * h;
    g.emplace_back(2.0 * qh.x(), 2.0 * qh.y());
  }
  return g;
}

double separation_loss(const std::vector<Vec2>& K, double threshold) {
  if (!(threshold > 0.0)) throw ValidationError("separation threshold must be > 0");
  double loss = 0.0;
  for (std::size_t i = 0; i < K.size(); ++i)
    for (std::size_t j = i + 1; j < K.size(); ++j) {
      const double gap = threshold - (K[i] - K[j]).norm();
      if (gap > 0.0) loss += gap * gap;
    }
  return loss;
}

std::vector<Vec2> separation_grad(const std::vector<Vec2>& K, double threshold) {
  std::vector<Vec2> g(K.size(), Vec2::Zero());
  for (std::size_t i = 0; i < K.size(); ++i)
    for (std::size_t j = i + 1; j < K.size(); ++j) {
      const Vec2 d = K[i] - K[j];
      const double len = d.norm();
      const double gap = threshold - len;
      if (gap <= 0.0 || len <= 0.0) continue;
      const Vec2 dir = d / len;
      g[i] -= 2.0 * gap * dir;
      g[j] += 2.0 * gap * dir;
    }
  return g;
}

std::vector<int> farthest_point_indices(const ToolShape& shape, int M, int start) {
  const int n = shape.size();
  if (M > n) throw ValidationError("more keypoints than boundary samples");
  std::vector<int> picked{start};
  Eigen::VectorXd mind = shape.geodesic.row(start).transpose();
  while (static_cast<int>(picked.size()) < M) {
    int best = -1;
    for (int k = 0; k < n; ++k) {
      if (best < 0 || mind[k] > mind[best] + 1e-9) best = k;
    }
    picked.push_back(best);
    mind = mind.cwiseMin(shape.geodesic.row(best).transpose());
  }
  return picked;
}

namespace {

struct Objective {
  const ToolShape& shape;
  const KeypointObjectiveConfig& config;
  double epsilon;
  double lambda = 1.0;
  double threshold;
  Eigen::VectorXd warm_g;

  double spread(const std::vector<Vec2>& K, std::vector<Vec2>* grad) {
    if (config.spread == SpreadTerm::Separation) {
      if (grad) *grad = separation_grad(K, threshold);
      return separation_loss(K, threshold);
    }
    auto c = coverage(shape, K, epsilon, 20000, 1e-11, warm_g.size() ? &warm_g : nullptr);
    warm_g = c.transport.g;
    if (grad) *grad = std::move(c.grad);
    return c.loss;
  }

  double total(const std::vector<Vec2>& K, std::vector<Vec2>* grad) {
    std::vector<Vec2> gs;
    const double s = spread(K, grad ? &gs : nullptr);
    const double q = quadric_loss(shape, K);
    if (grad) {
      *grad = quadric_grad(shape, K);
      for (std::size_t i = 0; i < K.size(); ++i) (*grad)[i] += lambda * gs[i];
    }
    return q + lambda * s;
  }
};

}  // namespace

KeypointOptimization optimize_keypoints_detailed(const ToolShape& shape, int M, const KeypointObjectiveConfig& config) {
  config.validate();
  if (M < 2) throw ValidationError("optimize_keypoints needs M >= 2");
  Rng rng = make_rng(config.seed, {static_cast<std::uint64_t>(shape.tool_id), 0x6b70ULL});
  const int first = std::uniform_int_distribution<int>(0, shape.size() - 1)(rng);
  std::vector<std::vector<Vec2>> inits;
  for (int s = 0; s < config.init_starts; ++s) {
    const int start = (first + s * shape.size() / config.init_starts) % shape.size();
    std::vector<Vec2> K0;
    for (int idx : farthest_point_indices(shape, M, start)) K0.push_back(shape.boundary[idx].point);
    inits.push_back(std::move(K0));
  }

  Objective obj{shape, config, config.epsilon > 0 ? config.epsilon : default_epsilon(shape.geodesic), 1.0,
                config.separation_threshold * shape.bbox_diag, {}};

  KeypointOptimization out;
  if (config.lambda_coverage >= 0.0) {
    obj.lambda = config.lambda_coverage;
  } else {
    const double s0 = obj.spread(inits.front(), nullptr);
    const double ref = M * std::pow(config.balance_offset * shape.bbox_diag, 2);
    obj.lambda = s0 > 1e-300 ? ref / s0 : 1.0;
  }
  out.lambda = obj.lambda;

  std::vector<Vec2> K, grad;
  double loss = std::numeric_limits<double>::infinity();
  for (auto& K0 : inits) {
    std::vector<Vec2> g0;
    const double l0 = obj.total(K0, &g0);
    if (l0 < loss) {
      loss = l0;
      K = std::move(K0);
      grad = std::move(g0);
    }
  }
  out.initial_loss = loss;
  std::vector<double> trace{loss};
  const double max_step = config.lr * shape.bbox_diag;
  double step = max_step;
  for (int it = 0; it < config.steps; ++it) {
    double gmax = 0.0;
    for (const auto& g : grad) gmax = std::max(gmax, g.norm());
    if (gmax <= 0.0 || step < 1e-9 * shape.bbox_diag) break;
    std::vector<Vec2> cand(K.size());
    for (std::size_t i = 0; i < K.size(); ++i) cand[i] = K[i] - (step / gmax) * grad[i];
    std::vector<Vec2> cand_grad;
    const double cand_loss = obj.total(cand, &cand_grad);
    if (!std::isfinite(cand_loss) || cand_loss > 1e6) {
      std::ostringstream msg;
      msg << "keypoint optimization diverged at iteration " << it << "; trace:";
      for (double t : trace) msg << ' ' << t;
      throw DivergenceError(msg.str());
    }
    if (cand_loss <= loss) {
      K = std::move(cand);
      grad = std::move(cand_grad);
      loss = cand_loss;
      trace.push_back(loss);
      step = std::min(max_step, step * 1.25);
    } else {
      step *= 0.5;
    }
  }
  out.final_loss = loss;
  out.unprojected = K;

  struct Projected {
    Vec2 point;
    double arc;
  };
  std::vector<Projected> proj;
  double offset = 0.0;
  for (const auto& x : K) {
    const auto p = project_to_outline(shape.outline, x);
    offset += p.distance;
    proj.push_back({p.point, p.arc});
  }
  out.mean_offset_before_projection = offset / static_cast<double>(K.size());
  std::stable_sort(proj.begin(), proj.end(), [](const Projected& a, const Projected& b) { return a.arc < b.arc; });

  out.keypoints.tool_id = shape.tool_id;
  for (const auto& p : proj) out.keypoints.points.push_back(p.point);
  out.keypoints.loss_trace = std::move(trace);
  return out;
}

KeypointSet optimize_keypoints(const ToolShape& shape, int M, const KeypointObjectiveConfig& config) {
  return optimize_keypoints_detailed(shape, M, config).keypoints;
}

std::vector<Vec2> keypoint_normals(const ToolShape& shape, const std::vector<Vec2>& K) {
  std::vector<Vec2> n;
  n.reserve(K.size());
  for (const Vec2& x : K) n.push_back(shape.boundary[nearest_boundary(shape, x)].normal);
  return n;
}

}  // namespace gift
