#include "gift/ot.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "gift/common.hpp"

namespace gift {

DiscreteDistribution DiscreteDistribution::uniform(int n) {
  DiscreteDistribution d;
  d.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
  return d;
}

void DiscreteDistribution::validate() const {
  if (weights.size() == 0) throw ValidationError("distribution is empty");
  if (!weights.allFinite() || weights.minCoeff() < 0.0) throw ValidationError("distribution has negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw ValidationError("distribution does not sum to 1");
}

double default_epsilon(const Eigen::MatrixXd& cost) { return 0.05 * cost.mean(); }

namespace {

// out_i = -eps * log sum_j w_j exp((pot_j - C_ij)/eps), skipping zero weights.
void soft_min_rows(const Eigen::MatrixXd& C, const Eigen::VectorXd& pot, const Eigen::VectorXd& log_w, double eps,
                   Eigen::VectorXd& out) {
  const Eigen::Index n = C.rows(), m = C.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j)
      if (std::isfinite(log_w[j])) mx = std::max(mx, (pot[j] - C(i, j)) / eps + log_w[j]);
    double s = 0.0;
    for (Eigen::Index j = 0; j < m; ++j)
      if (std::isfinite(log_w[j])) s += std::exp((pot[j] - C(i, j)) / eps + log_w[j] - mx);
    out[i] = -eps * (mx + std::log(s));
  }
}

void soft_min_cols(const Eigen::MatrixXd& C, const Eigen::VectorXd& pot, const Eigen::VectorXd& log_w, double eps,
                   Eigen::VectorXd& out) {
  const Eigen::Index n = C.rows(), m = C.cols();
  for (Eigen::Index j = 0; j < m; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::isfinite(log_w[i])) mx = std::max(mx, (pot[i] - C(i, j)) / eps + log_w[i]);
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::isfinite(log_w[i])) s += std::exp((pot[i] - C(i, j)) / eps + log_w[i] - mx);
    out[j] = -eps * (mx + std::log(s));
  }
}

}  // namespace

TransportResult sinkhorn(const DiscreteDistribution& mu, const DiscreteDistribution& nu, const Eigen::MatrixXd& cost,
                         const SinkhornOptions& options, const Eigen::VectorXd* warm_g) {
  mu.validate();
  nu.validate();
  const int n = mu.size(), m = nu.size();
  if (cost.rows() != n || cost.cols() != m) throw ValidationError("cost matrix shape does not match marginals");
  if (!cost.allFinite() || cost.minCoeff() < 0.0) throw ValidationError("cost matrix must be finite and nonnegative");
  const double eps = options.epsilon > 0.0 ? options.epsilon : default_epsilon(cost);
  if (!(eps > 0.0)) throw ValidationError("sinkhorn epsilon must be > 0");

  const Eigen::VectorXd log_mu = mu.weights.array().log();
  const Eigen::VectorXd log_nu = nu.weights.array().log();

  TransportResult r;
  r.epsilon = eps;
  r.f = Eigen::VectorXd::Zero(n);
  r.g = (warm_g && warm_g->size() == m) ? *warm_g : Eigen::VectorXd::Zero(m);

  // Stabilized scaling iterations: P = diag(mu*a) Kt diag(nu*b) with
  // Kt = exp((f + g - C)/e). The scalings a, b are folded back into the
  // log-domain potentials whenever they grow, which keeps Kt well scaled.
  Eigen::MatrixXd kt(n, m);
  Eigen::VectorXd a = Eigen::VectorXd::Ones(n), b = Eigen::VectorXd::Ones(m);
  auto absorb = [&](double e) {
    r.f.array() += e * a.array().log();
    r.g.array() += e * b.array().log();
    a.setOnes();
    b.setOnes();
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < n; ++i) kt(i, j) = std::exp((r.f[i] + r.g[j] - cost(i, j)) / e);
  };
  auto usable = [](const Eigen::VectorXd& v) { return v.allFinite() && v.minCoeff() > 0.0; };

  // Returns the number of iterations run; sets `converged` on success.
  auto run = [&](double e, int max_iter, double tol, bool& converged) {
    converged = false;
    absorb(e);
    Eigen::VectorXd kv = kt * nu.weights;
    int it = 0;
    while (it < max_iter) {
      if (!usable(kv)) {
        // kernel row underflow: take one exact log-domain sweep and re-absorb
        absorb(e);
        soft_min_rows(cost, r.g, log_nu, e, r.f);
        soft_min_cols(cost, r.f, log_mu, e, r.g);
        absorb(e);
        ++it;
        kv = kt * nu.weights;
        continue;
      }
      a = kv.cwiseInverse();
      const Eigen::VectorXd ku = kt.transpose() * mu.weights.cwiseProduct(a);
      if (!usable(ku)) {
        a.setOnes();
        kv.setZero();
        continue;
      }
      b = ku.cwiseInverse();
      ++it;
      kv = kt * nu.weights.cwiseProduct(b);
      const double violation = (mu.weights.array() * (a.array() * kv.array() - 1.0).abs()).sum();
      if (violation < tol) {
        converged = true;
        break;
      }
      if (a.array().log().abs().maxCoeff() > 30.0 || b.array().log().abs().maxCoeff() > 30.0) {
        absorb(e);
        kv = kt * nu.weights;
      }
    }
    r.f.array() += e * a.array().log();
    r.g.array() += e * b.array().log();
    a.setOnes();
    b.setOnes();
    return it;
  };

  bool stage_converged = false;
  if (options.anneal && !(warm_g && warm_g->size() == m)) {
    for (double e = cost.maxCoeff(); e > 4.0 * eps; e *= 0.25) run(e, options.max_iter, std::max(options.tol, 1e-3), stage_converged);
  }
  r.iterations = run(eps, options.max_iter, options.tol, r.converged);
  if (!r.f.allFinite() || !r.g.allFinite()) r.converged = false;

  r.plan.resize(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      r.plan(i, j) = (mu.weights[i] > 0.0 && nu.weights[j] > 0.0)
                         ? std::exp((r.f[i] + r.g[j] - cost(i, j)) / eps + log_mu[i] + log_nu[j])
                         : 0.0;
  r.cost = (r.plan.array() * cost.array()).sum();
  r.objective = mu.weights.dot(r.f) + nu.weights.dot(r.g);
  return r;
}

double exact_emd(const DiscreteDistribution& mu, const DiscreteDistribution& nu, const Eigen::MatrixXd& cost) {
  const int n = mu.size(), m = nu.size();
  if (n > 64 || m > 64) throw ValidationError("exact_emd is a small-instance oracle (N <= 64)");
  if (cost.rows() != n || cost.cols() != m) throw ValidationError("cost matrix shape does not match marginals");
  if (!mu.weights.allFinite() || !nu.weights.allFinite() || mu.weights.minCoeff() < 0 || nu.weights.minCoeff() < 0)
    throw ValidationError("exact_emd: invalid weights");
  if (std::abs(mu.weights.sum() - nu.weights.sum()) > 1e-9) throw ValidationError("exact_emd: total mass mismatch");

  // Nodes: 0 source, 1..n supplies, n+1..n+m demands, n+m+1 sink.
  struct Arc {
    int to;
    double cap, cost;
  };
  const int nodes = n + m + 2, source = 0, sink = n + m + 1;
  std::vector<Arc> arcs;
  std::vector<std::vector<int>> out(static_cast<std::size_t>(nodes));
  auto add = [&](int a, int b, double cap, double c) {
    out[a].push_back(static_cast<int>(arcs.size()));
    arcs.push_back({b, cap, c});
    out[b].push_back(static_cast<int>(arcs.size()));
    arcs.push_back({a, 0.0, -c});
  };
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) add(source, 1 + i, mu.weights[i], 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) add(1 + i, 1 + n + j, inf, cost(i, j));
  for (int j = 0; j < m; ++j) add(1 + n + j, sink, nu.weights[j], 0.0);

  const double target = std::min(mu.weights.sum(), nu.weights.sum());
  const double cap_eps = 1e-15;
  double flow = 0.0, total = 0.0;
  std::vector<double> dist(static_cast<std::size_t>(nodes));
  std::vector<int> pred(static_cast<std::size_t>(nodes));
  std::vector<char> queued(static_cast<std::size_t>(nodes));
  while (target - flow > 1e-14) {
    // SPFA shortest path on the residual network (negative reverse costs).
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(pred.begin(), pred.end(), -1);
    std::fill(queued.begin(), queued.end(), 0);
    std::deque<int> q{source};
    dist[source] = 0.0;
    queued[source] = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop_front();
      queued[u] = 0;
      for (int a : out[u]) {
        if (arcs[a].cap <= cap_eps) continue;
        const int v = arcs[a].to;
        const double nd = dist[u] + arcs[a].cost;
        if (nd < dist[v] - 1e-15) {
          dist[v] = nd;
          pred[v] = a;
          if (!queued[v]) {
            queued[v] = 1;
            q.push_back(v);
          }
        }
      }
    }
    if (!std::isfinite(dist[sink])) break;
    double push = target - flow;
    for (int v = sink; v != source; v = arcs[pred[v] ^ 1].to) push = std::min(push, arcs[pred[v]].cap);
    for (int v = sink; v != source; v = arcs[pred[v] ^ 1].to) {
      arcs[pred[v]].cap -= push;
      arcs[pred[v] ^ 1].cap += push;
    }
    flow += push;
    total += push * dist[sink];
  }
  if (target - flow > 1e-9) throw ValidationError("exact_emd: infeasible transport");
  return total;
}

}  // namespace gift
