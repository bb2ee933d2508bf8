#include "gift/afford.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "gift/keypoints.hpp"
#include "gift/rng.hpp"

namespace gift {

namespace {

constexpr double kFeatureScale = 10.0;  // meters to decimeters

Eigen::MatrixXd neighbor_mean(const KeypointGraph& graph) {
  const int M = graph.size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(M, M);
  for (int i = 0; i < M; ++i)
    for (int j : graph.neighbors[i]) A(i, j) += 1.0 / 3.0;
  return A;
}

using ConstMat = Eigen::Map<const Eigen::MatrixXd>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;

struct Params {
  std::vector<ConstMat> w_self, w_nbr;
  std::vector<ConstVec> bias;
  ConstVec u_grasp, u_inter, u_global;
  double c;

  explicit Params(const GraphModel& m)
      : u_grasp(ptr(m, 0), m.hidden), u_inter(ptr(m, 1), m.hidden), u_global(ptr(m, 2), m.hidden),
        c(*ptr(m, 3)) {
    const double* d = m.theta.data();
    Eigen::Index off = 0;
    for (int r = 0; r < m.rounds; ++r) {
      const int in = r == 0 ? m.in_dim : m.hidden;
      w_self.emplace_back(d + off, m.hidden, in);
      off += m.hidden * in;
      w_nbr.emplace_back(d + off, m.hidden, in);
      off += m.hidden * in;
      bias.emplace_back(d + off, m.hidden);
      off += m.hidden;
    }
  }

  static Eigen::Index score_offset(const GraphModel& m) {
    return 2 * m.hidden * (m.in_dim + m.hidden * (m.rounds - 1)) + m.hidden * m.rounds;
  }
  static const double* ptr(const GraphModel& m, int k) { return m.theta.data() + score_offset(m) + k * m.hidden; }
};

struct Pass {
  Eigen::MatrixXd A;
  std::vector<Eigen::MatrixXd> H, Agg;
  Eigen::VectorXd g;
  PairDistribution D;
};

Pass run(const GraphModel& model, const KeypointGraph& graph) {
  model.validate();
  if (graph.feature_dim() != model.in_dim) throw ValidationError("forward: feature width does not match the model");
  const Params p(model);
  const int M = graph.size();
  Pass s;
  s.A = neighbor_mean(graph);
  s.H.push_back(graph.features);
  for (int r = 0; r < model.rounds; ++r) {
    s.Agg.push_back(s.A * s.H.back());
    Eigen::MatrixXd Z = s.H.back() * p.w_self[r].transpose() + s.Agg.back() * p.w_nbr[r].transpose();
    Z.rowwise() += p.bias[r].transpose();
    s.H.push_back(Z.array().tanh().matrix());
  }
  const Eigen::MatrixXd& HL = s.H.back();
  s.g = HL.colwise().mean().transpose();
  const Eigen::VectorXd a = HL * p.u_grasp;
  const Eigen::VectorXd b = HL * p.u_inter;
  const double c = p.u_global.dot(s.g) + p.c;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j)
      if (i != j) best = std::max(best, a(i) + b(j) + c);
  s.D = PairDistribution::Zero(M, M);
  double sum = 0.0;
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j)
      if (i != j) sum += s.D(i, j) = std::exp(a(i) + b(j) + c - best);
  s.D /= sum;
  return s;
}

// Accumulates dL/dtheta given dL/dS (zero diagonal).
void backward(const GraphModel& model, const Pass& s, const Eigen::MatrixXd& dS, Eigen::VectorXd& grad) {
  const Params p(model);
  const int M = static_cast<int>(dS.rows());
  const Eigen::VectorXd rows = dS.rowwise().sum();
  const Eigen::VectorXd cols = dS.colwise().sum().transpose();
  const double total = dS.sum();
  const Eigen::MatrixXd& HL = s.H.back();

  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (int r = 0; r < model.rounds; ++r) {
    offsets.push_back(off);
    const int in = r == 0 ? model.in_dim : model.hidden;
    off += 2 * model.hidden * in + model.hidden;
  }
  off = Params::score_offset(model);
  const int h = model.hidden;
  grad.segment(off, h) += HL.transpose() * rows;
  grad.segment(off + h, h) += HL.transpose() * cols;
  grad.segment(off + 2 * h, h) += total * s.g;
  grad(off + 3 * h) += total;

  Eigen::MatrixXd dH = rows * p.u_grasp.transpose() + cols * p.u_inter.transpose();
  dH.rowwise() += (total / M) * p.u_global.transpose();
  for (int r = model.rounds - 1; r >= 0; --r) {
    const Eigen::MatrixXd& Hn = s.H[r + 1];
    const Eigen::MatrixXd dZ = (dH.array() * (1.0 - Hn.array().square())).matrix();
    const int in = r == 0 ? model.in_dim : model.hidden;
    Eigen::Map<Eigen::MatrixXd> gws(grad.data() + offsets[r], h, in);
    Eigen::Map<Eigen::MatrixXd> gwn(grad.data() + offsets[r] + h * in, h, in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets[r] + 2 * h * in, h);
    gws += dZ.transpose() * s.H[r];
    gwn += dZ.transpose() * s.Agg[r];
    gb += dZ.colwise().sum().transpose();
    if (r > 0) dH = dZ * p.w_self[r] + s.A.transpose() * (dZ * p.w_nbr[r]);
  }
}

Selection finish_selection(const GraspResult& grasp, const std::vector<Vec2>& K, int inter_idx) {
  Selection s;
  s.grasp = grasp;
  s.grasp_idx = grasp.valid ? nearest_keypoint(K, grasp.grasp_point) : 0;
  s.inter_idx = inter_idx;
  return s;
}

GraspResult best_stable_grasp(const ToolShape& shape, const GripperSpec& gripper) {
  GraspResult best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& [i, j] : all_antipodal_pairs(shape, gripper)) {
    const double sc = stability_score(shape, i, j, gripper);
    if (sc > best_score) {
      best_score = sc;
      best = grasp_from_pair(shape, i, j, Vec2::Zero());
    }
  }
  if (best.valid) best.distance_to_keypoint = 0.0;
  return best;
}

void check_keypoints(const std::vector<Vec2>& K) {
  if (K.size() < 4) throw ValidationError("baseline: need at least 4 keypoints");
}

}  // namespace

KeypointGraph build_graph(const std::vector<Vec2>& K, const std::vector<Vec2>& normals,
                          const std::vector<double>& material) {
  const int M = static_cast<int>(K.size());
  if (M < 4) throw ValidationError("build_graph: need at least 4 keypoints");
  if (!normals.empty() && static_cast<int>(normals.size()) != M)
    throw ValidationError("build_graph: normals size mismatch");
  if (!material.empty() && static_cast<int>(material.size()) != M)
    throw ValidationError("build_graph: material size mismatch");
  for (int i = 0; i < M; ++i) {
    if (!K[i].allFinite()) throw ValidationError("build_graph: non-finite keypoint");
    for (int j = i + 1; j < M; ++j)
      if ((K[i] - K[j]).norm() < 1e-9) throw ValidationError("build_graph: duplicate keypoints");
  }
  Vec2 c = Vec2::Zero();
  for (const Vec2& k : K) c += k;
  c /= M;

  KeypointGraph g;
  g.features = Eigen::MatrixXd::Zero(M, material.empty() ? 5 : 6);
  g.neighbors.resize(M);
  for (int i = 0; i < M; ++i) {
    const Vec2 rel = kFeatureScale * (K[i] - c);
    g.features(i, 0) = rel.x();
    g.features(i, 1) = rel.y();
    g.features(i, 2) = rel.norm();
    if (!normals.empty()) {
      g.features(i, 3) = normals[i].x();
      g.features(i, 4) = normals[i].y();
    }
    if (!material.empty()) g.features(i, 5) = material[i];

    std::vector<std::pair<double, int>> d;
    for (int j = 0; j < M; ++j)
      if (j != i) d.emplace_back((K[i] - K[j]).squaredNorm(), j);
    std::partial_sort(d.begin(), d.begin() + 3, d.end());
    for (int k = 0; k < 3; ++k) g.neighbors[i][k] = d[k].second;
  }
  return g;
}

std::vector<GraphModel::Block> GraphModel::blocks() const {
  std::vector<Block> out;
  Eigen::Index off = 0;
  auto add = [&](std::string name, int rows, int cols) {
    out.push_back({std::move(name), rows, cols, off});
    off += static_cast<Eigen::Index>(rows) * cols;
  };
  for (int r = 0; r < rounds; ++r) {
    const int in = r == 0 ? in_dim : hidden;
    const std::string p = "round" + std::to_string(r) + ".";
    add(p + "w_self", hidden, in);
    add(p + "w_nbr", hidden, in);
    add(p + "bias", hidden, 1);
  }
  add("score.u_grasp", hidden, 1);
  add("score.u_inter", hidden, 1);
  add("score.u_global", hidden, 1);
  add("score.bias", 1, 1);
  return out;
}

Eigen::Index GraphModel::parameter_count() const {
  const auto b = blocks();
  return b.back().offset + static_cast<Eigen::Index>(b.back().rows) * b.back().cols;
}

std::string GraphModel::arch_hash() const {
  std::ostringstream key;
  key << "gnn-mean-tanh/in=" << in_dim << "/h=" << hidden << "/L=" << rounds << "/score=linear";
  std::uint64_t h = 0;
  for (char ch : key.str()) h = splitmix64(h ^ static_cast<unsigned char>(ch));
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

void GraphModel::validate() const {
  if (in_dim < 1 || hidden < 1 || rounds < 1) throw ValidationError("model: bad dimensions");
  if (theta.size() != parameter_count()) throw ValidationError("model: parameter count mismatch");
  if (!theta.allFinite()) throw ValidationError("model: non-finite weights");
}

GraphModel init_model(int in_dim, int hidden, int rounds, std::uint64_t seed) {
  GraphModel m;
  m.in_dim = in_dim;
  m.hidden = hidden;
  m.rounds = rounds;
  if (in_dim < 1 || hidden < 1 || rounds < 1) throw ValidationError("model: bad dimensions");
  m.theta = Eigen::VectorXd::Zero(m.parameter_count());
  Rng rng = make_rng(seed, {0x6e6e});
  for (const auto& b : m.blocks()) {
    if (b.name.ends_with("bias")) continue;
    const double fan_in = b.cols == 1 ? 3.0 * hidden : b.cols;
    const double fan_out = b.cols == 1 ? 1.0 : b.rows;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(b.rows) * b.cols; ++k) m.theta(b.offset + k) = limit * u(rng);
  }
  return m;
}

PairDistribution forward(const GraphModel& model, const KeypointGraph& graph) { return run(model, graph).D; }

std::string to_string(LossVariant v) { return v == LossVariant::Paper ? "paper" : "log"; }

LossVariant parse_loss_variant(const std::string& s) {
  if (s == "paper") return LossVariant::Paper;
  if (s == "log") return LossVariant::Log;
  throw ValidationError("unknown loss variant: " + s);
}

TrainingSet make_training_set(const std::vector<ExperienceTuple>& tuples) {
  TrainingSet set;
  std::map<std::pair<int, std::vector<double>>, int> index;
  for (const auto& t : tuples) {
    if (!t.grasp_success) {
      ++set.skipped_failed;
      continue;
    }
    const int M = static_cast<int>(t.keypoints.size());
    if (t.grasp_idx < 0 || t.grasp_idx >= M || t.inter_idx < 0 || t.inter_idx >= M)
      throw ValidationError("training set: keypoint index out of range");
    if (t.grasp_idx == t.inter_idx) {
      ++set.skipped_diagonal;
      continue;
    }
    std::vector<double> key;
    for (const Vec2& k : t.keypoints) key.insert(key.end(), {k.x(), k.y()});
    for (const Vec2& n : t.normals) key.insert(key.end(), {n.x(), n.y()});
    auto [it, added] = index.try_emplace({t.tool_id, std::move(key)}, static_cast<int>(set.graphs.size()));
    if (added) set.graphs.push_back(build_graph(t.keypoints, t.normals));
    set.examples.push_back({it->second, t.grasp_idx, t.inter_idx, t.reward});
  }
  return set;
}

LossResult reinforce_loss(const GraphModel& model, const TrainingSet& data, const std::vector<int>& batch,
                          LossVariant variant, double reward_scale) {
  if (batch.empty()) throw ValidationError("reinforce_loss: empty batch");
  if (!(reward_scale > 0.0)) throw ValidationError("reinforce_loss: reward scale must be > 0");
  // Group by graph so each keypoint set is forwarded once.
  std::map<int, std::vector<int>> by_graph;
  for (int e : batch) {
    if (e < 0 || e >= static_cast<int>(data.examples.size())) throw ValidationError("reinforce_loss: bad example index");
    const TrainingExample& ex = data.examples[e];
    if (ex.graph < 0 || ex.graph >= static_cast<int>(data.graphs.size()))
      throw ValidationError("reinforce_loss: bad graph index");
    const int M = data.graphs[ex.graph].size();
    if (ex.grasp_idx < 0 || ex.grasp_idx >= M || ex.inter_idx < 0 || ex.inter_idx >= M)
      throw ValidationError("reinforce_loss: keypoint index out of range");
    if (ex.grasp_idx == ex.inter_idx) throw ValidationError("reinforce_loss: diagonal pair has zero probability");
    by_graph[ex.graph].push_back(e);
  }
  LossResult out;
  out.grad = Eigen::VectorXd::Zero(model.parameter_count());
  for (const auto& [gi, examples] : by_graph) {
    const Pass s = run(model, data.graphs[gi]);
    const int M = static_cast<int>(s.D.rows());
    Eigen::MatrixXd dS = Eigen::MatrixXd::Zero(M, M);
    bool any = false;
    for (int e : examples) {
      const TrainingExample& ex = data.examples[e];
      const double R = ex.reward / reward_scale;
      const double P = s.D(ex.grasp_idx, ex.inter_idx);
      if (R == 0.0) continue;
      any = true;
      // dP/dS = P (E - D); d log P / dS = E - D
      const double coef = variant == LossVariant::Paper ? -R * P : -R;
      out.loss += variant == LossVariant::Paper ? -R * P : -R * std::log(P);
      dS -= coef * s.D;
      dS(ex.grasp_idx, ex.inter_idx) += coef;
    }
    if (!any) continue;
    dS.diagonal().setZero();
    backward(model, s, dS, out.grad);
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ValidationError("train: lr must be >= 0");
  if (epochs < 0) throw ValidationError("train: epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (checkpoint_every < 1) throw ValidationError("train: checkpoint_every must be >= 1");
}

TrainResult train(GraphModel model, const TrainingSet& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  model.validate();
  if (data.examples.empty()) throw ValidationError("train: empty dataset");
  for (const auto& g : data.graphs)
    if (g.feature_dim() != model.in_dim) throw ValidationError("train: feature width does not match the model");

  TrainResult out;
  Checkpoint last_good{0, model};
  const Eigen::Index P = model.parameter_count();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(P), m2 = Eigen::VectorXd::Zero(P);
  long step = 0;
  double scale = 0.0;
  const int n = static_cast<int>(data.examples.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(cfg.seed, {0x7472});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const std::vector<int> batch(order.begin() + start, order.begin() + std::min(n, start + cfg.batch_size));
      double s = 1.0;
      if (cfg.normalize_rewards) {
        for (int e : batch) scale = std::max(scale, std::abs(data.examples[e].reward));
        if (scale > 0.0) s = scale;
      }
      const LossResult L = reinforce_loss(model, data, batch, cfg.loss, s);
      if (!std::isfinite(L.loss) || !L.grad.allFinite())
        throw TrainingDiverged("train: loss became non-finite at epoch " + std::to_string(epoch), last_good);
      total += L.loss;
      ++step;
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * L.grad;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * L.grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      model.theta.array() -= cfg.lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.adam_eps);
    }
    if (!model.theta.allFinite())
      throw TrainingDiverged("train: weights became non-finite at epoch " + std::to_string(epoch), last_good);
    out.loss_history.push_back(total / n);
    if (epoch % cfg.checkpoint_every == 0) {
      last_good = {epoch, model};
      out.checkpoints.push_back(last_good);
    }
    if (on_epoch) on_epoch(epoch, model);
  }
  out.model = std::move(model);
  return out;
}

void validate_distribution(const PairDistribution& D, double tol) {
  if (D.rows() != D.cols() || D.rows() < 2) throw ValidationError("distribution: must be square");
  if (!D.allFinite() || D.minCoeff() < 0.0) throw ValidationError("distribution: entries must be finite and >= 0");
  if (std::abs(D.sum() - 1.0) > tol) throw ValidationError("distribution: entries must sum to 1");
}

std::pair<int, int> select_pair(const PairDistribution& D, SelectMode mode, std::uint64_t seed) {
  validate_distribution(D, 1e-6);
  const int M = static_cast<int>(D.rows());
  if (mode == SelectMode::Greedy) {
    int best = 0;
    for (int k = 1; k < M * M; ++k)
      if (D(k / M, k % M) > D(best / M, best % M)) best = k;
    return {best / M, best % M};
  }
  std::vector<double> w(M * M);
  for (int k = 0; k < M * M; ++k) w[k] = D(k / M, k % M);
  Rng rng = make_rng(seed, {0x73616d});
  std::discrete_distribution<int> pick(w.begin(), w.end());
  const int k = pick(rng);
  return {k / M, k % M};
}

std::string to_string(Selector s) {
  switch (s) {
    case Selector::Gift: return "gift";
    case Selector::Simple: return "simple";
    case Selector::GraspOpt: return "grasp_opt";
    case Selector::Leverage: return "leverage";
  }
  return "?";
}

Selector parse_selector(const std::string& s) {
  for (Selector x : {Selector::Gift, Selector::Simple, Selector::GraspOpt, Selector::Leverage})
    if (to_string(x) == s) return x;
  throw ValidationError("unknown selector: " + s);
}

double stability_score(const ToolShape& shape, int i, int j, const GripperSpec& gripper) {
  const double gap = (shape.boundary[i].point - shape.boundary[j].point).norm();
  return antipodal_margin(shape, i, j, gripper.friction_angle) / gripper.friction_angle - gap / gripper.width;
}

std::vector<std::pair<int, int>> all_antipodal_pairs(const ToolShape& shape, const GripperSpec& gripper) {
  return antipodal_pairs(shape, Vec2::Zero(), std::numeric_limits<double>::infinity(), gripper.friction_angle,
                         gripper.width);
}

int farthest_keypoint(const std::vector<Vec2>& K, const Vec2& x) {
  int best = -1;
  double d = -1.0;
  for (std::size_t i = 0; i < K.size(); ++i) {
    const double di = (K[i] - x).squaredNorm();
    if (di > d) {
      d = di;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Selection baseline_simple(const ToolShape& shape, const std::vector<Vec2>& K, std::uint64_t seed,
                          const GripperSpec& gripper) {
  check_keypoints(K);
  Rng rng = make_rng(seed, {0x73696d});
  const auto pairs = all_antipodal_pairs(shape, gripper);
  GraspResult grasp;
  if (!pairs.empty()) {
    const auto [i, j] = pairs[std::uniform_int_distribution<std::size_t>(0, pairs.size() - 1)(rng)];
    grasp = grasp_from_pair(shape, i, j, Vec2::Zero());
    grasp.distance_to_keypoint = 0.0;
  }
  const int inter = std::uniform_int_distribution<int>(0, static_cast<int>(K.size()) - 1)(rng);
  return finish_selection(grasp, K, inter);
}

Selection baseline_grasp_opt(const ToolShape& shape, const std::vector<Vec2>& K, std::uint64_t seed,
                             const GripperSpec& gripper) {
  check_keypoints(K);
  Rng rng = make_rng(seed, {0x6f7074});
  const int inter = std::uniform_int_distribution<int>(0, static_cast<int>(K.size()) - 1)(rng);
  return finish_selection(best_stable_grasp(shape, gripper), K, inter);
}

Selection baseline_leverage(const ToolShape& shape, const std::vector<Vec2>& K, std::uint64_t,
                            const GripperSpec& gripper) {
  check_keypoints(K);
  const GraspResult grasp = best_stable_grasp(shape, gripper);
  return finish_selection(grasp, K, grasp.valid ? farthest_keypoint(K, grasp.grasp_point) : 0);
}

Selection gift_select(const GraphModel& model, const ToolShape& shape, const std::vector<Vec2>& K,
                      const GripperSpec& gripper) {
  const PairDistribution D = forward(model, build_graph(K, keypoint_normals(shape, K)));
  const auto [g, i] = select_pair(D, SelectMode::Greedy);
  Selection s;
  s.grasp = plan_grasp(shape, K[g], gripper);
  s.grasp_idx = g;
  s.inter_idx = i;
  return s;
}

}  // namespace gift
