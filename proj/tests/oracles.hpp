// Independent reference implementations used only by tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gift/geom.hpp"

namespace oracle {

inline Eigen::MatrixXd floyd_warshall(const gift::BoundaryGraph& g) {
  const int n = static_cast<int>(g.nodes.size());
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, inf);
  for (int i = 0; i < n; ++i) d(i, i) = 0.0;
  for (int u = 0; u < n; ++u)
    for (const auto& [v, w] : g.adjacency[u]) d(u, v) = std::min(d(u, v), w);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
  return d.topLeftCorner(g.n_samples, g.n_samples);
}

/// Hungarian method (Kuhn-Munkres, O(n^3)) for a square cost matrix.
inline double hungarian(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1), v(n + 1), minv(n + 1);
  std::vector<int> p(n + 1), way(n + 1);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j)
        if (!used[j]) {
          const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
          if (minv[j] < delta) {
            delta = minv[j];
            j1 = j;
          }
        }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double cost = 0.0;
  for (int j = 1; j <= n; ++j) cost += a(p[j] - 1, j - 1);
  return cost;
}

inline double point_line_distance(const gift::Vec2& x, const gift::Vec2& a, const gift::Vec2& b) {
  const gift::Vec2 d = (b - a).normalized();
  return std::abs(d.x() * (x.y() - a.y()) - d.y() * (x.x() - a.x()));
}

/// Relative error of an analytic gradient against a reference, taken over the
/// whole stacked vector.
inline double relative_error(const std::vector<gift::Vec2>& analytic, const std::vector<gift::Vec2>& reference) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    num += (analytic[i] - reference[i]).squaredNorm();
    den += reference[i].squaredNorm();
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

template <class F>
std::vector<gift::Vec2> central_difference(const std::vector<gift::Vec2>& K, double h, F&& f) {
  std::vector<gift::Vec2> g(K.size(), gift::Vec2::Zero());
  for (std::size_t i = 0; i < K.size(); ++i)
    for (int d = 0; d < 2; ++d) {
      auto kp = K, km = K;
      kp[i][d] += h;
      km[i][d] -= h;
      g[i][d] = (f(kp) - f(km)) / (2.0 * h);
    }
  return g;
}

}  // namespace oracle
