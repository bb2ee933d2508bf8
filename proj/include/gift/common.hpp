#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace gift {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Bad input or a violated precondition. The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite state inside the simulator. The CLI maps it to exit code 3.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative optimizer left its admissible range (loss blew up or went NaN).
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline Vec2 rotate(const Vec2& p, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * p.x() - s * p.y(), s * p.x() + c * p.y()};
}

}  // namespace gift
