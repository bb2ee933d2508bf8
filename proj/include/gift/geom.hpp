#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gift/common.hpp"

namespace gift {

struct Material {
  double density = 1.0;      // kg/m^2
  double restitution = 0.5;  // [0, 1]
  double friction = 0.5;     // >= 0

  void validate() const;
  bool operator==(const Material&) const = default;
};

/// Dense, hard striking material (density ratio 6 against wood).
Material steel();
/// Light, soft handle material.
Material wood();

enum class ToolConfig { T, L, X };
enum class PartLabel { Handle, Head };

std::string to_string(ToolConfig config);
std::string to_string(PartLabel label);
ToolConfig parse_tool_config(const std::string& s);
PartLabel parse_part_label(const std::string& s);

/// Convex polygon with counter-clockwise vertices in the tool frame (meters).
struct ConvexPart {
  std::vector<Vec2> vertices;
  Material material;
  PartLabel label = PartLabel::Handle;

  double area() const;
  Vec2 centroid() const;
};

/// Throws ValidationError unless `vertices` is a CCW convex polygon with at
/// least three vertices and area above 1e-9 m^2.
void validate_convex(const std::vector<Vec2>& vertices);

double polygon_area(const std::vector<Vec2>& poly);
/// Sutherland-Hodgman clip of two convex CCW polygons. Empty when disjoint.
std::vector<Vec2> convex_intersection(const std::vector<Vec2>& a, const std::vector<Vec2>& b);
bool point_in_convex(const std::vector<Vec2>& poly, const Vec2& p, double tol = 0.0);

struct MassProperties {
  double mass = 0.0;
  Vec2 com = Vec2::Zero();
  double inertia = 0.0;  // about the center of mass
};

/// Uniform-density polygon (any simple CCW polygon).
MassProperties polygon_mass(const std::vector<Vec2>& poly, double density);

/// A boundary sample on the union outline.
struct BoundaryPoint {
  Vec2 point = Vec2::Zero();
  Vec2 normal = Vec2::Zero();  // outward unit normal
  double arc = 0.0;            // arc-length position from outline vertex 0
  int edge = 0;                // outline edge containing the sample
};

struct OutlineProjection {
  Vec2 point = Vec2::Zero();
  double arc = 0.0;
  double distance = 0.0;
  int edge = 0;
};

/// Union outline of two overlapping convex parts, CCW, starting at the outline
/// vertex closest to the first vertex of `a`. Throws ValidationError when the
/// parts do not overlap or the union is not a single simple polygon.
std::vector<Vec2> union_outline(const ConvexPart& a, const ConvexPart& b);

double outline_perimeter(const std::vector<Vec2>& outline);

/// N samples at uniform arc-length spacing; sample k sits at arc
/// (k + offset_fraction) * perimeter / N. Requires N >= 16 and a simple outline.
std::vector<BoundaryPoint> resample_boundary(const std::vector<Vec2>& outline, int n,
                                             double offset_fraction = 0.0);

OutlineProjection project_to_outline(const std::vector<Vec2>& outline, const Vec2& x);

/// Weighted undirected graph used for geodesics. Nodes [0, n_samples) are the
/// boundary samples; any further nodes are part-junction vertices.
struct BoundaryGraph {
  int n_samples = 0;
  std::vector<Vec2> nodes;
  std::vector<std::vector<std::pair<int, double>>> adjacency;
};

/// Samples and junction vertices chained along the outline by arc length,
/// plus straight chords between every pair of junction vertices (they all lie
/// in the convex overlap of the two parts).
BoundaryGraph boundary_graph(const std::vector<Vec2>& outline, const std::vector<int>& outline_part,
                             const std::vector<BoundaryPoint>& boundary);

/// All-pairs shortest path restricted to sample nodes (Dijkstra per source).
Eigen::MatrixXd geodesic_matrix(const BoundaryGraph& graph);

/// Homogeneous line quadric p p^T with p = [n_x, n_y, -n.a] for the line
/// through a and b (n is the unit normal).
Eigen::Matrix3d line_quadric(const Vec2& a, const Vec2& b);

struct ToolShape {
  int tool_id = 0;
  ToolConfig config = ToolConfig::T;
  std::uint64_t seed = 0;
  std::array<ConvexPart, 2> parts;  // [0] handle, [1] head

  std::vector<Vec2> outline;
  std::vector<int> outline_part;  // owning part index per outline edge
  std::vector<BoundaryPoint> boundary;
  std::vector<std::vector<int>> sample_edges;  // outline edges incident to each sample
  Eigen::MatrixXd geodesic;
  std::vector<Eigen::Matrix3d> quadrics;
  double perimeter = 0.0;
  double bbox_diag = 0.0;  // bounding box aligned with the first handle edge

  const ConvexPart& handle() const { return parts[0]; }
  const ConvexPart& head() const { return parts[1]; }
  int size() const { return static_cast<int>(boundary.size()); }
};

/// Builds all derived data (outline, samples, geodesics, quadrics).
ToolShape build_tool(int tool_id, ToolConfig config, std::uint64_t seed, ConvexPart handle,
                     ConvexPart head, int n_samples = 64);

struct Range {
  double lo = 0.0, hi = 0.0;
};

/// Part dimension distributions for procedural generation (meters).
struct DimRanges {
  Range handle_length{0.20, 0.32};
  Range handle_width{0.016, 0.032};
  Range handle_taper{0.75, 1.0};  // tip width / base width
  Range head_length{0.08, 0.16};
  Range head_width{0.05, 0.075};
  Range head_taper{0.8, 1.0};
  Range cross_position{0.55, 0.8};  // X: head center as fraction of handle length
  Range l_overhang{0.004, 0.01};    // L: head overhang past the handle side

  void validate() const;
};

/// Handle runs from the origin along +y; the head is the cross-bar part.
/// A pure function of its arguments.
ToolShape generate_tool(int tool_id, std::uint64_t seed, ToolConfig config, const DimRanges& dims,
                        const Material& handle_material, const Material& head_material,
                        int n_samples = 64);

/// Index of the Euclidean-nearest boundary sample, lowest index on ties.
int nearest_boundary(const ToolShape& shape, const Vec2& x);

/// Part index (0 handle, 1 head) owning the outline edge nearest to x.
int part_at(const ToolShape& shape, const Vec2& x);

struct GripperSpec {
  double width = 0.045;          // maximum jaw opening (m)
  double friction_angle = 0.35;  // half-angle of the friction cone (rad)
  double radius = 0.03;          // search radius around the grasp keypoint (m)
};

/// Angular slack of an antipodal pair: friction_angle minus the largest
/// deviation between the grasp axis and either inward normal. Negative when
/// outside the cone.
double antipodal_margin(const ToolShape& shape, int i, int j, double friction_angle);

/// All pairs i < j with both samples within `radius` of `center`, gap at most
/// `gripper_width`, normals anti-parallel within `friction_angle`, and the
/// grasp axis inside both friction cones. Lexicographic order.
std::vector<std::pair<int, int>> antipodal_pairs(const ToolShape& shape, const Vec2& center, double radius,
                                                 double friction_angle, double gripper_width);

MassProperties tool_mass(const ToolShape& shape);

}  // namespace gift
