#include "gift/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#define BOOST_GEOMETRY_NO_ROBUSTNESS
#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "gift/rng.hpp"

namespace gift {

namespace bg = boost::geometry;
using BPoint = bg::model::d2::point_xy<double>;
using BPoly = bg::model::polygon<BPoint, false, true>;
using BMulti = bg::model::multi_polygon<BPoly>;

void Material::validate() const {
  if (!(density > 0.0) || !std::isfinite(density)) throw ValidationError("material density must be > 0");
  if (!(restitution >= 0.0 && restitution <= 1.0)) throw ValidationError("material restitution must be in [0,1]");
  if (!(friction >= 0.0) || !std::isfinite(friction)) throw ValidationError("material friction must be >= 0");
}

Material steel() { return {60.0, 0.8, 0.4}; }
Material wood() { return {10.0, 0.25, 0.5}; }

std::string to_string(ToolConfig config) {
  switch (config) {
    case ToolConfig::T: return "T";
    case ToolConfig::L: return "L";
    case ToolConfig::X: return "X";
  }
  return "?";
}

std::string to_string(PartLabel label) { return label == PartLabel::Head ? "head" : "handle"; }

ToolConfig parse_tool_config(const std::string& s) {
  if (s == "T") return ToolConfig::T;
  if (s == "L") return ToolConfig::L;
  if (s == "X") return ToolConfig::X;
  throw ValidationError("unknown tool config '" + s + "'");
}

PartLabel parse_part_label(const std::string& s) {
  if (s == "head") return PartLabel::Head;
  if (s == "handle") return PartLabel::Handle;
  throw ValidationError("unknown part label '" + s + "'");
}

double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) a += cross2(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * a;
}

double ConvexPart::area() const { return polygon_area(vertices); }
Vec2 ConvexPart::centroid() const { return polygon_mass(vertices, 1.0).com; }

void validate_convex(const std::vector<Vec2>& v) {
  if (v.size() < 3) throw ValidationError("convex part needs at least 3 vertices");
  for (const auto& p : v)
    if (!p.allFinite()) throw ValidationError("convex part has non-finite vertex");
  if (polygon_area(v) <= 1e-9) throw ValidationError("convex part must be CCW with area > 1e-9 m^2");
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e0 = v[(i + 1) % n] - v[i];
    const Vec2 e1 = v[(i + 2) % n] - v[(i + 1) % n];
    if (cross2(e0, e1) < -1e-12) throw ValidationError("part polygon is not convex");
  }
}

std::vector<Vec2> convex_intersection(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  std::vector<Vec2> out = a;
  for (std::size_t k = 0; k < b.size() && !out.empty(); ++k) {
    const Vec2 p0 = b[k], p1 = b[(k + 1) % b.size()];
    const Vec2 d = p1 - p0;
    auto side = [&](const Vec2& q) { return cross2(d, q - p0); };
    std::vector<Vec2> in = std::move(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2& cur = in[i];
      const Vec2& nxt = in[(i + 1) % in.size()];
      const double sc = side(cur), sn = side(nxt);
      if (sc >= 0) out.push_back(cur);
      if ((sc >= 0) != (sn >= 0)) {
        const double t = sc / (sc - sn);
        out.push_back(cur + t * (nxt - cur));
      }
    }
  }
  if (out.size() < 3 || polygon_area(out) <= 1e-14) return {};
  return out;
}

bool point_in_convex(const std::vector<Vec2>& poly, const Vec2& p, double tol) {
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    const Vec2 d = b - a;
    if (cross2(d, p - a) / d.norm() < -tol) return false;
  }
  return true;
}

MassProperties polygon_mass(const std::vector<Vec2>& poly, double density) {
  double area = 0.0, ixx = 0.0;
  Vec2 first = Vec2::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    const double c = cross2(p, q);
    area += 0.5 * c;
    first += c * (p + q) / 6.0;
    ixx += c * (p.squaredNorm() + p.dot(q) + q.squaredNorm()) / 12.0;
  }
  MassProperties m;
  if (area <= 0.0) return m;
  m.mass = density * area;
  m.com = first / area;
  m.inertia = density * ixx - m.mass * m.com.squaredNorm();
  return m;
}

namespace {

BPoly to_bpoly(const std::vector<Vec2>& v) {
  BPoly p;
  for (const auto& q : v) bg::append(p.outer(), BPoint(q.x(), q.y()));
  bg::append(p.outer(), BPoint(v.front().x(), v.front().y()));
  return p;
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b, double* t_out = nullptr) {
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  double t = len2 > 0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  if (t_out) *t_out = t;
  return (a + t * d - p).norm();
}

double polygon_boundary_distance(const std::vector<Vec2>& poly, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i)
    best = std::min(best, segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
  return best;
}

Vec2 outward_normal(const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  return Vec2(d.y(), -d.x()).normalized();
}

}  // namespace

std::vector<Vec2> union_outline(const ConvexPart& a, const ConvexPart& b) {
  validate_convex(a.vertices);
  validate_convex(b.vertices);
  const auto overlap = convex_intersection(a.vertices, b.vertices);
  if (overlap.empty() || polygon_area(overlap) <= 1e-9)
    throw ValidationError("tool parts do not overlap; cannot form a connected tool");

  BMulti out;
  bg::union_(to_bpoly(a.vertices), to_bpoly(b.vertices), out);
  if (out.size() != 1 || !out.front().inners().empty())
    throw ValidationError("union of tool parts is not a single simple polygon");

  std::vector<Vec2> ring;
  for (const auto& p : out.front().outer()) ring.emplace_back(p.x(), p.y());
  if (ring.size() > 1 && (ring.front() - ring.back()).norm() < 1e-12) ring.pop_back();

  // Drop duplicate and collinear vertices.
  bool changed = true;
  while (changed && ring.size() > 3) {
    changed = false;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const Vec2& prev = ring[(i + ring.size() - 1) % ring.size()];
      const Vec2& cur = ring[i];
      const Vec2& next = ring[(i + 1) % ring.size()];
      const Vec2 d0 = cur - prev, d1 = next - cur;
      if (d0.norm() < 1e-12 || std::abs(cross2(d0, d1)) <= 1e-14 * d0.norm() * d1.norm() + 1e-18) {
        if (d0.norm() >= 1e-12 && d0.dot(d1) < 0) continue;  // spike, keep
        ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  if (polygon_area(ring) < 0) std::reverse(ring.begin(), ring.end());

  const Vec2 anchor = a.vertices.front();
  std::size_t start = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const double d = (ring[i] - anchor).norm();
    if (d < best - 1e-12) {
      best = d;
      start = i;
    }
  }
  std::rotate(ring.begin(), ring.begin() + static_cast<std::ptrdiff_t>(start), ring.end());
  return ring;
}

double outline_perimeter(const std::vector<Vec2>& outline) {
  double p = 0.0;
  for (std::size_t i = 0; i < outline.size(); ++i) p += (outline[(i + 1) % outline.size()] - outline[i]).norm();
  return p;
}

std::vector<BoundaryPoint> resample_boundary(const std::vector<Vec2>& outline, int n, double offset_fraction) {
  if (n < 16) throw ValidationError("resample_boundary requires N >= 16");
  if (outline.size() < 3) throw ValidationError("outline needs at least 3 vertices");
  BPoly poly = to_bpoly(outline);
  if (!bg::is_simple(poly) || std::abs(polygon_area(outline)) <= 1e-12)
    throw ValidationError("outline is self-intersecting or degenerate");

  const std::size_t m = outline.size();
  std::vector<double> cum(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) cum[i + 1] = cum[i] + (outline[(i + 1) % m] - outline[i]).norm();
  const double perimeter = cum[m];
  const double spacing = perimeter / n;

  std::vector<BoundaryPoint> samples(static_cast<std::size_t>(n));
  std::size_t edge = 0;
  for (int k = 0; k < n; ++k) {
    double s = (k + offset_fraction) * spacing;
    s = std::fmod(s, perimeter);
    if (s < 0) s += perimeter;
    while (edge + 1 < m && cum[edge + 1] <= s) ++edge;
    if (s < cum[edge]) edge = 0;
    while (edge + 1 < m && cum[edge + 1] <= s) ++edge;
    const Vec2 a = outline[edge], b = outline[(edge + 1) % m];
    const double len = cum[edge + 1] - cum[edge];
    const double t = len > 0 ? (s - cum[edge]) / len : 0.0;
    auto& bp = samples[static_cast<std::size_t>(k)];
    bp.point = a + t * (b - a);
    bp.normal = outward_normal(a, b);
    bp.arc = s;
    bp.edge = static_cast<int>(edge);
  }
  return samples;
}

OutlineProjection project_to_outline(const std::vector<Vec2>& outline, const Vec2& x) {
  OutlineProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  double arc = 0.0;
  for (std::size_t i = 0; i < outline.size(); ++i) {
    const Vec2 a = outline[i], b = outline[(i + 1) % outline.size()];
    double t = 0.0;
    const double d = segment_distance(x, a, b, &t);
    const double len = (b - a).norm();
    if (d < best.distance - 1e-15) {
      best.distance = d;
      best.point = a + t * (b - a);
      best.arc = arc + t * len;
      best.edge = static_cast<int>(i);
    }
    arc += len;
  }
  return best;
}

BoundaryGraph boundary_graph(const std::vector<Vec2>& outline, const std::vector<int>& outline_part,
                             const std::vector<BoundaryPoint>& boundary) {
  BoundaryGraph g;
  g.n_samples = static_cast<int>(boundary.size());
  const std::size_t m = outline.size();
  std::vector<double> cum(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) cum[i + 1] = cum[i] + (outline[(i + 1) % m] - outline[i]).norm();
  const double perimeter = cum[m];

  std::vector<double> arc;
  for (const auto& b : boundary) {
    g.nodes.push_back(b.point);
    arc.push_back(b.arc);
  }
  std::vector<int> junctions;
  if (outline_part.size() == m) {
    for (std::size_t v = 0; v < m; ++v) {
      const int before = outline_part[(v + m - 1) % m];
      const int after = outline_part[v];
      if (before != after) {
        junctions.push_back(static_cast<int>(g.nodes.size()));
        g.nodes.push_back(outline[v]);
        arc.push_back(cum[v]);
      }
    }
  }
  g.adjacency.assign(g.nodes.size(), {});
  std::vector<int> order(g.nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return arc[a] < arc[b]; });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int a = order[k], b = order[(k + 1) % order.size()];
    double w = arc[b] - arc[a];
    if (k + 1 == order.size()) w += perimeter;
    w = std::max(w, 0.0);
    g.adjacency[a].emplace_back(b, w);
    g.adjacency[b].emplace_back(a, w);
  }
  for (std::size_t i = 0; i < junctions.size(); ++i)
    for (std::size_t j = i + 1; j < junctions.size(); ++j) {
      const int a = junctions[i], b = junctions[j];
      const double w = (g.nodes[a] - g.nodes[b]).norm();
      g.adjacency[a].emplace_back(b, w);
      g.adjacency[b].emplace_back(a, w);
    }
  return g;
}

Eigen::MatrixXd geodesic_matrix(const BoundaryGraph& graph) {
  const int n = graph.n_samples;
  const int total = static_cast<int>(graph.nodes.size());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> dist(static_cast<std::size_t>(total));
  std::vector<char> done(static_cast<std::size_t>(total));
  for (int src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    std::fill(done.begin(), done.end(), 0);
    dist[src] = 0.0;
    for (int it = 0; it < total; ++it) {
      int u = -1;
      for (int v = 0; v < total; ++v)
        if (!done[v] && (u < 0 || dist[v] < dist[u])) u = v;
      if (u < 0 || !std::isfinite(dist[u])) break;
      done[u] = 1;
      for (const auto& [v, w] : graph.adjacency[u])
        if (dist[u] + w < dist[v]) dist[v] = dist[u] + w;
    }
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(dist[j])) throw ValidationError("boundary graph is disconnected");
      if (j > src) G(src, j) = dist[j];
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) G(i, j) = G(j, i);
  return G;
}

Eigen::Matrix3d line_quadric(const Vec2& a, const Vec2& b) {
  const Vec2 n = outward_normal(a, b);
  const Eigen::Vector3d p(n.x(), n.y(), -n.dot(a));
  return p * p.transpose();
}

ToolShape build_tool(int tool_id, ToolConfig config, std::uint64_t seed, ConvexPart handle, ConvexPart head,
                     int n_samples) {
  handle.material.validate();
  head.material.validate();
  handle.label = PartLabel::Handle;
  head.label = PartLabel::Head;

  ToolShape s;
  s.tool_id = tool_id;
  s.config = config;
  s.seed = seed;
  s.parts = {std::move(handle), std::move(head)};
  s.outline = union_outline(s.parts[0], s.parts[1]);
  s.perimeter = outline_perimeter(s.outline);

  const std::size_t m = s.outline.size();
  s.outline_part.resize(m);
  for (std::size_t e = 0; e < m; ++e) {
    const Vec2 mid = 0.5 * (s.outline[e] + s.outline[(e + 1) % m]);
    const double d0 = polygon_boundary_distance(s.parts[0].vertices, mid);
    const double d1 = polygon_boundary_distance(s.parts[1].vertices, mid);
    s.outline_part[e] = d1 < d0 - 1e-12 ? 1 : 0;
  }

  s.boundary = resample_boundary(s.outline, n_samples);
  s.geodesic = geodesic_matrix(boundary_graph(s.outline, s.outline_part, s.boundary));

  // Each sample carries the edge it lies on; the sample nearest to an outline
  // vertex also carries both edges meeting at that vertex.
  const int n = s.size();
  s.sample_edges.assign(static_cast<std::size_t>(n), {});
  for (int k = 0; k < n; ++k) s.sample_edges[k].push_back(s.boundary[k].edge);
  for (std::size_t v = 0; v < m; ++v) {
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      const double d = (s.boundary[k].point - s.outline[v]).norm();
      if (d < best - 1e-12) {
        best = d;
        nearest = k;
      }
    }
    for (int e : {static_cast<int>((v + m - 1) % m), static_cast<int>(v)}) {
      auto& edges = s.sample_edges[nearest];
      if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.push_back(e);
    }
  }
  s.quadrics.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    Eigen::Matrix3d Q = Eigen::Matrix3d::Zero();
    for (int e : s.sample_edges[k]) Q += line_quadric(s.outline[e], s.outline[(e + 1) % m]);
    s.quadrics[k] = Q;
  }

  // box axes follow the handle's first edge so the diagonal is rotation invariant
  const Vec2 ax = (s.handle().vertices[1] - s.handle().vertices[0]).normalized();
  const Vec2 ay(-ax.y(), ax.x());
  Vec2 lo(ax.dot(s.outline.front()), ay.dot(s.outline.front())), hi = lo;
  for (const auto& p : s.outline) {
    const Vec2 q(ax.dot(p), ay.dot(p));
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  s.bbox_diag = (hi - lo).norm();
  return s;
}

void DimRanges::validate() const {
  for (const Range* r : {&handle_length, &handle_width, &handle_taper, &head_length, &head_width, &head_taper,
                         &cross_position, &l_overhang})
    if (!(r->lo > 0.0) || r->hi < r->lo) throw ValidationError("dimension ranges need 0 < min <= max");
}

ToolShape generate_tool(int tool_id, std::uint64_t seed, ToolConfig config, const DimRanges& dims,
                        const Material& handle_material, const Material& head_material, int n_samples) {
  dims.validate();
  Rng rng = make_rng(seed, {0x746f6f6cULL});
  auto draw = [&](const Range& r) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return r.lo + (r.hi - r.lo) * u(rng);
  };
  const double length = draw(dims.handle_length);
  const double base_w = draw(dims.handle_width);
  const double tip_w = base_w * draw(dims.handle_taper);
  const double head_len = draw(dims.head_length);
  const double head_w = draw(dims.head_width);
  const double left_w = head_w * draw(dims.head_taper);
  const double right_w = head_w * draw(dims.head_taper);
  const double cross = draw(dims.cross_position);
  const double overhang = draw(dims.l_overhang);

  ConvexPart handle;
  handle.vertices = {{-0.5 * base_w, 0.0}, {0.5 * base_w, 0.0}, {0.5 * tip_w, length}, {-0.5 * tip_w, length}};
  handle.material = handle_material;
  handle.label = PartLabel::Handle;

  Vec2 center = Vec2::Zero();
  switch (config) {
    case ToolConfig::T: center = {0.0, length}; break;
    case ToolConfig::L: center = {-0.5 * tip_w - overhang + 0.5 * head_len, length}; break;
    case ToolConfig::X: center = {0.0, cross * length}; break;
  }
  ConvexPart head;
  const double hx = 0.5 * head_len;
  head.vertices = {{center.x() - hx, center.y() - 0.5 * left_w},
                   {center.x() + hx, center.y() - 0.5 * right_w},
                   {center.x() + hx, center.y() + 0.5 * right_w},
                   {center.x() - hx, center.y() + 0.5 * left_w}};
  head.material = head_material;
  head.label = PartLabel::Head;
  return build_tool(tool_id, config, seed, std::move(handle), std::move(head), n_samples);
}

int nearest_boundary(const ToolShape& shape, const Vec2& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < shape.size(); ++k) {
    const double d = (shape.boundary[k].point - x).squaredNorm();
    if (d < best_d * (1.0 - 1e-12) - 1e-30) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

int part_at(const ToolShape& shape, const Vec2& x) {
  return shape.outline_part[project_to_outline(shape.outline, x).edge];
}

double antipodal_margin(const ToolShape& shape, int i, int j, double friction_angle) {
  const auto& a = shape.boundary[i];
  const auto& b = shape.boundary[j];
  const Vec2 d = b.point - a.point;
  const double len = d.norm();
  if (len <= 0.0) return -std::numeric_limits<double>::infinity();
  const Vec2 axis = d / len;
  auto angle = [](const Vec2& u, const Vec2& v) { return std::atan2(std::abs(cross2(u, v)), u.dot(v)); };
  const double dev = std::max({angle(-a.normal, axis), angle(-b.normal, -axis), angle(a.normal, -b.normal)});
  return friction_angle - dev;
}

std::vector<std::pair<int, int>> antipodal_pairs(const ToolShape& shape, const Vec2& center, double radius,
                                                 double friction_angle, double gripper_width) {
  if (!(radius > 0.0)) throw ValidationError("antipodal search radius must be > 0");
  std::vector<int> near;
  for (int k = 0; k < shape.size(); ++k)
    if ((shape.boundary[k].point - center).norm() <= radius) near.push_back(k);
  std::vector<std::pair<int, int>> out;
  for (std::size_t p = 0; p < near.size(); ++p)
    for (std::size_t q = p + 1; q < near.size(); ++q) {
      const int i = near[p], j = near[q];
      const double gap = (shape.boundary[i].point - shape.boundary[j].point).norm();
      if (gap <= 0.0 || gap > gripper_width) continue;
      if (antipodal_margin(shape, i, j, friction_angle) >= -1e-9) out.emplace_back(i, j);
    }
  return out;
}

MassProperties tool_mass(const ToolShape& shape) {
  const auto& handle = shape.handle();
  const auto& head = shape.head();
  const MassProperties a = polygon_mass(handle.vertices, handle.material.density);
  const MassProperties b = polygon_mass(head.vertices, head.material.density);
  MassProperties c;
  const auto overlap = convex_intersection(handle.vertices, head.vertices);
  if (!overlap.empty()) c = polygon_mass(overlap, handle.material.density);

  // Combine about the origin; the overlap is counted once, with head density.
  auto origin_inertia = [](const MassProperties& m) { return m.inertia + m.mass * m.com.squaredNorm(); };
  MassProperties out;
  out.mass = a.mass + b.mass - c.mass;
  const Vec2 moment = a.mass * a.com + b.mass * b.com - c.mass * c.com;
  out.com = moment / out.mass;
  out.inertia = origin_inertia(a) + origin_inertia(b) - origin_inertia(c) - out.mass * out.com.squaredNorm();
  return out;
}

}  // namespace gift
