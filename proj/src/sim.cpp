#include "gift/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gift {

std::string to_string(ShapeTag tag) {
  switch (tag) {
    case ShapeTag::None: return "none";
    case ShapeTag::ToolHandle: return "tool_handle";
    case ShapeTag::ToolHead: return "tool_head";
    case ShapeTag::Gripper: return "gripper";
    case ShapeTag::ThermosBody: return "thermos_body";
    case ShapeTag::ThermosHandle: return "thermos_handle";
    case ShapeTag::Wall: return "wall";
    case ShapeTag::Cylinder: return "cylinder";
    case ShapeTag::Peg: return "peg";
    case ShapeTag::Channel: return "channel";
  }
  return "none";
}

Shape Shape::polygon(const std::vector<Vec2>& vertices, const Material& m, ShapeTag tag) {
  if (vertices.size() < 3 || vertices.size() > static_cast<std::size_t>(kMaxShapeVerts))
    throw ValidationError("shape polygon needs 3.." + std::to_string(kMaxShapeVerts) + " vertices");
  validate_convex(vertices);
  Shape s;
  s.n = static_cast<int>(vertices.size());
  std::copy(vertices.begin(), vertices.end(), s.v.begin());
  s.material = m;
  s.tag = tag;
  return s;
}

Shape Shape::disc(const Vec2& center, double radius, const Material& m, ShapeTag tag) {
  if (!(radius > 0.0)) throw ValidationError("disc radius must be positive");
  Shape s;
  s.circle = true;
  s.center = center;
  s.radius = radius;
  s.material = m;
  s.tag = tag;
  return s;
}

void Body::update_world() {
  world.resize(shapes.size());
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  auto xf = [&](const Vec2& q) { return Vec2(pose.p.x() + c * q.x() - s * q.y(), pose.p.y() + s * q.x() + c * q.y()); };
  lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  hi = -lo;
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const Shape& sh = shapes[k];
    WorldShape& ws = world[k];
    ws.circle = sh.circle;
    ws.n = sh.n;
    if (sh.circle) {
      ws.center = xf(sh.center);
      ws.radius = sh.radius;
      ws.lo = ws.center.array() - sh.radius;
      ws.hi = ws.center.array() + sh.radius;
    } else {
      ws.lo = ws.hi = ws.v[0] = xf(sh.v[0]);
      for (int i = 1; i < sh.n; ++i) {
        ws.v[i] = xf(sh.v[i]);
        ws.lo = ws.lo.cwiseMin(ws.v[i]);
        ws.hi = ws.hi.cwiseMax(ws.v[i]);
      }
      for (int i = 0; i < sh.n; ++i) {
        const Vec2 e = ws.v[(i + 1) % sh.n] - ws.v[i];
        ws.normal[i] = Vec2(e.y(), -e.x()).normalized();
      }
    }
    lo = lo.cwiseMin(ws.lo);
    hi = hi.cwiseMax(ws.hi);
  }
}

namespace {

struct Clip {
  Vec2 p;
  double sep;
};

// Reference face of polygon `ref` against polygon `inc`; normal points from ref to inc.
ContactEvent polygon_manifold(const WorldShape& ref, int edge, const WorldShape& inc) {
  const Vec2 n = ref.normal[edge];
  const Vec2 r0 = ref.v[edge], r1 = ref.v[(edge + 1) % ref.n];
  // incident edge: the one most anti-parallel to n
  int ie = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < inc.n; ++i) {
    const double d = inc.normal[i].dot(n);
    if (d < best) {
      best = d;
      ie = i;
    }
  }
  Vec2 p0 = inc.v[ie], p1 = inc.v[(ie + 1) % inc.n];
  const Vec2 t = (r1 - r0).normalized();
  const double lo = t.dot(r0), hi = t.dot(r1);
  auto clip = [&](Vec2& a, Vec2& b, double bound, double sign) {
    const double da = sign * (t.dot(a) - bound), db = sign * (t.dot(b) - bound);
    if (da <= 0.0 && db <= 0.0) return;
    if (da > 0.0 && db > 0.0) return;  // fully outside, filtered below
    const Vec2 x = a + (b - a) * (da / (da - db));
    if (da > 0.0) a = x;
    else b = x;
  };
  // keep the part with lo <= t.x <= hi
  clip(p0, p1, hi, 1.0);
  clip(p0, p1, lo, -1.0);
  Clip pts[2] = {{p0, n.dot(p0 - r0)}, {p1, n.dot(p1 - r0)}};
  const double tol = 1e-12;
  Vec2 sum = Vec2::Zero();
  int count = 0;
  double min_sep = std::numeric_limits<double>::infinity();
  for (const auto& c : pts) {
    const double tc = t.dot(c.p);
    if (tc < lo - tol || tc > hi + tol) continue;
    min_sep = std::min(min_sep, c.sep);
  }
  for (const auto& c : pts) {
    const double tc = t.dot(c.p);
    if (tc < lo - tol || tc > hi + tol) continue;
    if (c.sep <= min_sep + kContactMargin) {
      sum += c.p;
      ++count;
    }
  }
  ContactEvent ev;
  ev.normal = n;
  if (count == 0) {
    // incident edge lies beyond the reference face extent: fall back to the deepest vertex
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < inc.n; ++i) {
      const double s = n.dot(inc.v[i] - r0);
      if (s < d) {
        d = s;
        ev.point = inc.v[i];
      }
    }
    ev.depth = -d;
  } else {
    ev.point = sum / count;
    ev.depth = -min_sep;
  }
  return ev;
}

std::optional<ContactEvent> polygon_polygon(const WorldShape& a, const WorldShape& b, double margin) {
  auto axis = [&](const WorldShape& p, const WorldShape& q, int& edge) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.n; ++i) {
      double m = std::numeric_limits<double>::infinity();
      for (int j = 0; j < q.n; ++j) m = std::min(m, p.normal[i].dot(q.v[j] - p.v[i]));
      if (m > best) {
        best = m;
        edge = i;
      }
      if (best > margin) break;
    }
    return best;
  };
  int ea = 0, eb = 0;
  const double sa = axis(a, b, ea);
  if (sa > margin) return std::nullopt;
  const double sb = axis(b, a, eb);
  if (sb > margin) return std::nullopt;
  if (sb > sa + 1e-9) {
    ContactEvent ev = polygon_manifold(b, eb, a);
    ev.normal = -ev.normal;
    return ev;
  }
  return polygon_manifold(a, ea, b);
}

// Polygon p against circle c; normal from p to c.
std::optional<ContactEvent> polygon_circle(const WorldShape& p, const WorldShape& c, double margin) {
  double best = -std::numeric_limits<double>::infinity();
  int edge = 0;
  for (int i = 0; i < p.n; ++i) {
    const double s = p.normal[i].dot(c.center - p.v[i]);
    if (s > best) {
      best = s;
      edge = i;
    }
  }
  if (best > c.radius + margin) return std::nullopt;
  ContactEvent ev;
  if (best <= 0.0) {
    ev.normal = p.normal[edge];
    ev.depth = c.radius - best;
    ev.point = c.center - ev.normal * c.radius;
    return ev;
  }
  // closest boundary point
  double d2 = std::numeric_limits<double>::infinity();
  Vec2 q = Vec2::Zero();
  for (int i = 0; i < p.n; ++i) {
    const Vec2 a = p.v[i], b = p.v[(i + 1) % p.n];
    const Vec2 e = b - a;
    const double t = std::clamp((c.center - a).dot(e) / e.squaredNorm(), 0.0, 1.0);
    const Vec2 x = a + t * e;
    const double dd = (c.center - x).squaredNorm();
    if (dd < d2) {
      d2 = dd;
      q = x;
    }
  }
  const double d = std::sqrt(d2);
  if (d - c.radius > margin) return std::nullopt;
  ev.normal = d > 1e-12 ? Vec2((c.center - q) / d) : p.normal[edge];
  ev.depth = c.radius - d;
  ev.point = q;
  return ev;
}

}  // namespace

std::optional<ContactEvent> collide(const WorldShape& a, const WorldShape& b, double margin) {
  if (a.lo.x() > b.hi.x() + margin || b.lo.x() > a.hi.x() + margin || a.lo.y() > b.hi.y() + margin ||
      b.lo.y() > a.hi.y() + margin)
    return std::nullopt;
  if (a.circle && b.circle) {
    const Vec2 d = b.center - a.center;
    const double len = d.norm();
    if (len - a.radius - b.radius > margin) return std::nullopt;
    ContactEvent ev;
    ev.normal = len > 1e-12 ? Vec2(d / len) : Vec2::UnitX();
    ev.depth = a.radius + b.radius - len;
    ev.point = a.center + ev.normal * (a.radius - 0.5 * ev.depth);
    return ev;
  }
  if (!a.circle && !b.circle) return polygon_polygon(a, b, margin);
  if (!a.circle) return polygon_circle(a, b, margin);
  auto ev = polygon_circle(b, a, margin);
  if (ev) ev->normal = -ev->normal;
  return ev;
}

int World::add(Body b) {
  if (bodies.size() >= static_cast<std::size_t>(kMaxBodies)) throw ValidationError("too many bodies");
  if (b.kind == BodyKind::Dynamic && !(b.mass > 0.0)) throw ValidationError("dynamic body needs positive mass");
  if (b.kind == BodyKind::Dynamic && !b.prismatic && !(b.inertia > 0.0))
    throw ValidationError("dynamic body needs positive inertia");
  b.update_world();
  bodies.push_back(b);
  return static_cast<int>(bodies.size()) - 1;
}

namespace {

bool may_collide(const Body& a, const Body& b) {
  if (a.kind == BodyKind::Dynamic || b.kind == BodyKind::Dynamic) return true;
  return (a.kind == BodyKind::Kinematic) != (b.kind == BodyKind::Kinematic);
}

}  // namespace

ContactList World::detect(double margin) const {
  ContactList out;
  const int n = static_cast<int>(bodies.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Body& a = bodies[i];
      const Body& b = bodies[j];
      if (!may_collide(a, b)) continue;
      if (a.lo.x() > b.hi.x() + margin || b.lo.x() > a.hi.x() + margin || a.lo.y() > b.hi.y() + margin ||
          b.lo.y() > a.hi.y() + margin)
        continue;
      for (std::size_t si = 0; si < a.world.size(); ++si) {
        for (std::size_t sj = 0; sj < b.world.size(); ++sj) {
          auto c = collide(a.world[si], b.world[sj], margin);
          if (!c) continue;
          if (out.size() == out.capacity()) throw SimulationError("contact buffer overflow");
          c->step = steps;
          c->body_a = i;
          c->body_b = j;
          c->shape_a = static_cast<int>(si);
          c->shape_b = static_cast<int>(sj);
          c->tag_a = a.shapes[si].tag;
          c->tag_b = b.shapes[sj].tag;
          out.push_back(*c);
        }
      }
    }
  }
  return out;
}

double World::max_penetration() const {
  double worst = 0.0;
  for (const auto& c : detect(0.0)) worst = std::max(worst, c.depth);
  return worst;
}

Action clamp_action(const Action& a) {
  auto finite = [](double x) { return std::isfinite(x) ? x : 0.0; };
  return {std::clamp(finite(a.dx), -kMaxStepTranslation, kMaxStepTranslation),
          std::clamp(finite(a.dy), -kMaxStepTranslation, kMaxStepTranslation),
          std::clamp(finite(a.dtheta), -kMaxStepRotation, kMaxStepRotation)};
}

namespace {

Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

// Velocity of world point q on the body.
Vec2 point_velocity(const Body& b, const Vec2& q) {
  if (b.kind == BodyKind::Static) return Vec2::Zero();
  const Vec2 ref = b.pose.apply(b.ref_local);
  return b.v + b.w * perp(q - ref);
}

// Inverse effective mass of the body at q along direction d.
double inverse_mass_along(const Body& b, const Vec2& q, const Vec2& d) {
  switch (b.kind) {
    case BodyKind::Static: return 0.0;
    case BodyKind::Kinematic: {
      if (!(b.mass > 0.0)) return 0.0;
      const double rn = cross2(q - b.pose.apply(b.com_local), d);
      return 1.0 / b.mass + (b.inertia > 0.0 ? rn * rn / b.inertia : 0.0);
    }
    case BodyKind::Dynamic: {
      if (b.prismatic) {
        const double a = b.axis.dot(d);
        return a * a * b.inv_mass();
      }
      const double rn = cross2(q - b.pose.p, d);
      return b.inv_mass() + rn * rn * b.inv_inertia();
    }
  }
  return 0.0;
}

void apply_impulse(Body& b, const Vec2& q, const Vec2& impulse) {
  if (b.kind != BodyKind::Dynamic) return;
  if (b.prismatic) {
    b.v += b.axis * (b.axis.dot(impulse) * b.inv_mass());
    return;
  }
  b.v += impulse * b.inv_mass();
  b.w += cross2(q - b.pose.p, impulse) * b.inv_inertia();
}

void clamp_joint(Body& b) {
  if (!b.prismatic) return;
  const double s = b.joint_position();
  const double c = std::clamp(s, b.s_min, b.s_max);
  b.pose.p = b.anchor + b.axis * c;
  double vs = b.v.dot(b.axis);
  if ((c <= b.s_min && vs < 0.0) || (c >= b.s_max && vs > 0.0)) vs = 0.0;
  b.v = b.axis * vs;
  b.w = 0.0;
}

void decelerate(Body& b, double dt) {
  if (b.kind != BodyKind::Dynamic) return;
  const double speed = b.v.norm();
  if (speed > 0.0 && b.lin_decel > 0.0) {
    const double s = std::max(0.0, speed - b.lin_decel * dt);
    b.v *= s / speed;
  }
  if (b.w != 0.0 && b.ang_decel > 0.0) {
    const double s = std::max(0.0, std::abs(b.w) - b.ang_decel * dt);
    b.w = std::copysign(s, b.w);
  }
}

struct Row {
  Vec2 t;
  double wn = 0.0, wt = 0.0, target = 0.0, mu = 0.0, jn = 0.0, jt = 0.0;
  bool tool = false;
};

constexpr double kRestitutionThreshold = 0.01;  // m/s
constexpr int kVelocityPasses = 4;
constexpr int kPositionPasses = 4;

void solve_row(World& w, ContactEvent& c, Row& r, bool first) {
  Body& A = w.bodies[c.body_a];
  Body& B = w.bodies[c.body_b];
  const Vec2 rel = point_velocity(B, c.point) - point_velocity(A, c.point);
  const double vn = rel.dot(c.normal);
  double dn = 0.0;
  if (r.tool) {
    // single impact against the position-controlled tool
    if (!first || vn >= 0.0 || r.wn <= 0.0) return;
    dn = (r.target - vn) / r.wn;
  } else {
    if (r.wn <= 0.0) return;
    const double acc = std::max(0.0, r.jn + (r.target - vn) / r.wn);
    dn = acc - r.jn;
  }
  r.jn += dn;
  Vec2 P = c.normal * dn;
  apply_impulse(A, c.point, -P);
  apply_impulse(B, c.point, P);
  if (r.wt > 0.0 && r.mu > 0.0) {
    const Vec2 rel2 = point_velocity(B, c.point) - point_velocity(A, c.point);
    const double vt = rel2.dot(r.t);
    const double lim = r.mu * r.jn;
    const double acc = std::clamp(r.jt - vt / r.wt, -lim, lim);
    const double dt = acc - r.jt;
    r.jt = acc;
    const Vec2 Pt = r.t * dt;
    apply_impulse(A, c.point, -Pt);
    apply_impulse(B, c.point, Pt);
  }
}

// Pushes dynamic bodies out of overlaps.
void correct_positions(World& w) {
  for (int pass = 0; pass < kPositionPasses; ++pass) {
    const ContactList cs = w.detect(0.0);
    double worst = 0.0;
    for (const auto& c : cs) {
      if (c.depth <= 0.0) continue;
      Body& A = w.bodies[c.body_a];
      Body& B = w.bodies[c.body_b];
      auto mobility = [&](const Body& b, const Vec2& dir) {
        if (b.kind != BodyKind::Dynamic) return 0.0;
        if (b.prismatic) {
          const double a = b.axis.dot(dir);
          return std::abs(a) < 0.2 ? 0.0 : a * a * b.inv_mass();
        }
        return b.inv_mass();
      };
      const double ma = mobility(A, -c.normal), mb = mobility(B, c.normal);
      if (ma + mb <= 0.0) continue;
      worst = std::max(worst, c.depth);
      const double push = c.depth + 0.25 * kPenetrationTol;
      auto move = [&](Body& b, const Vec2& dir, double amount) {
        if (amount <= 0.0) return;
        if (b.prismatic) {
          const double a = b.axis.dot(dir);
          b.pose.p += b.axis * (amount / a);
          clamp_joint(b);
        } else {
          b.pose.p += dir * amount;
        }
        b.update_world();
      };
      move(A, -c.normal, push * ma / (ma + mb));
      move(B, c.normal, push * mb / (ma + mb));
    }
    if (worst <= 0.5 * kPenetrationTol) break;
  }
}

void check_finite(const World& w) {
  for (const auto& b : w.bodies) {
    if (!b.pose.p.allFinite() || !std::isfinite(b.pose.theta) || !b.v.allFinite() || !std::isfinite(b.w))
      throw SimulationError("non-finite body state");
  }
}

// One trial move at a fraction of the commanded action. Returns the largest
// remaining tool overlap.
double advance(World& w, int tool, const Vec2& pivot, const Action& a, double frac, ContactList& out) {
  Body& T = w.bodies[tool];
  const Vec2 grasp = T.pose.apply(pivot);
  const double dth = a.dtheta * frac;
  const Vec2 dp(a.dx * frac, a.dy * frac);
  T.pose.theta += dth;
  T.pose.p = grasp + dp - rotate(pivot, T.pose.theta);
  T.ref_local = pivot;
  T.v = dp / w.dt;
  T.w = dth / w.dt;
  T.update_world();

  for (auto& b : w.bodies) decelerate(b, w.dt);

  out = w.detect(kContactMargin);
  boost::container::static_vector<Row, kMaxContacts> rows(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    ContactEvent& c = out[k];
    Row& r = rows[k];
    const Body& A = w.bodies[c.body_a];
    const Body& B = w.bodies[c.body_b];
    r.tool = A.kind == BodyKind::Kinematic || B.kind == BodyKind::Kinematic;
    r.t = perp(c.normal);
    r.wn = inverse_mass_along(A, c.point, c.normal) + inverse_mass_along(B, c.point, c.normal);
    r.wt = inverse_mass_along(A, c.point, r.t) + inverse_mass_along(B, c.point, r.t);
    if (r.tool) {
      // the tool is driven, so its effective mass adds compliance but the
      // dynamic side carries the whole exchange
      const Body& D = A.kind == BodyKind::Kinematic ? B : A;
      const Body& K = A.kind == BodyKind::Kinematic ? A : B;
      const double wd = inverse_mass_along(D, c.point, c.normal);
      const double wk = inverse_mass_along(K, c.point, c.normal);
      r.wn = wd > 0.0 ? wd + wk : 0.0;
      const double wdt = inverse_mass_along(D, c.point, r.t);
      r.wt = wdt > 0.0 ? wdt + inverse_mass_along(K, c.point, r.t) : 0.0;
    }
    const Material& ma = A.shapes[c.shape_a].material;
    const Material& mb = B.shapes[c.shape_b].material;
    const double e = std::min(ma.restitution, mb.restitution);
    r.mu = std::sqrt(ma.friction * mb.friction);
    const double vn = (point_velocity(B, c.point) - point_velocity(A, c.point)).dot(c.normal);
    c.normal_speed = vn;
    r.target = vn < -kRestitutionThreshold ? -e * vn : 0.0;
    if (r.tool) r.target = -e * vn;
  }
  for (int pass = 0; pass < kVelocityPasses; ++pass)
    for (std::size_t k = 0; k < out.size(); ++k) solve_row(w, out[k], rows[k], pass == 0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].impulse = rows[k].jn;
    out[k].impulse_vec = out[k].normal * rows[k].jn + rows[k].t * rows[k].jt;
  }

  for (auto& b : w.bodies) {
    if (b.kind != BodyKind::Dynamic) continue;
    if (b.prismatic) {
      b.v = b.axis * b.v.dot(b.axis);
      b.w = 0.0;
    }
    if (b.v.x() == 0.0 && b.v.y() == 0.0 && b.w == 0.0) continue;
    b.pose.p += b.v * w.dt;
    b.pose.theta += b.w * w.dt;
    clamp_joint(b);
    b.update_world();
  }
  correct_positions(w);

  double worst = 0.0;
  const Body& Tn = w.bodies[tool];
  for (std::size_t i = 0; i < w.bodies.size(); ++i) {
    if (static_cast<int>(i) == tool || !may_collide(Tn, w.bodies[i])) continue;
    for (const auto& sa : Tn.world)
      for (const auto& sb : w.bodies[i].world)
        if (auto c = collide(sa, sb, 0.0)) worst = std::max(worst, c->depth);
  }
  return worst;
}

// Tool overlap with static geometry after a trial move, without touching the world.
double static_overlap(const World& w, int tool, const Vec2& pivot, const Action& a, double frac) {
  Body T = w.bodies[tool];
  const Vec2 grasp = T.pose.apply(pivot);
  T.pose.theta += a.dtheta * frac;
  T.pose.p = grasp + Vec2(a.dx, a.dy) * frac - rotate(pivot, T.pose.theta);
  T.update_world();
  double worst = 0.0;
  for (const auto& b : w.bodies) {
    if (b.kind != BodyKind::Static) continue;
    if (T.lo.x() > b.hi.x() || b.lo.x() > T.hi.x() || T.lo.y() > b.hi.y() || b.lo.y() > T.hi.y()) continue;
    for (const auto& sa : T.world)
      for (const auto& sb : b.world)
        if (auto c = collide(sa, sb, 0.0)) worst = std::max(worst, c->depth);
  }
  return worst;
}

struct Snapshot {
  Pose pose;
  Vec2 v;
  double w;
};

}  // namespace

ContactList world_step(World& world, int tool, const Vec2& pivot, const Action& action) {
  if (tool < 0 || tool >= static_cast<int>(world.bodies.size()) || world.bodies[tool].kind != BodyKind::Kinematic)
    throw ValidationError("world_step: tool must index a kinematic body");
  const Action a = clamp_action(action);
  boost::container::static_vector<Snapshot, kMaxBodies> snap;
  for (const auto& b : world.bodies) snap.push_back({b.pose, b.v, b.w});
  static constexpr double fractions[] = {1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.0};
  ContactList contacts;
  std::size_t start = 0;
  while (fractions[start] > 0.0 && static_overlap(world, tool, pivot, a, fractions[start]) > kPenetrationTol) ++start;
  for (std::size_t k = start; k < std::size(fractions); ++k) {
    if (k > start) {
      for (std::size_t i = 0; i < world.bodies.size(); ++i) {
        Body& b = world.bodies[i];
        if (b.kind == BodyKind::Static) continue;
        const bool moved = b.pose.p != snap[i].pose.p || b.pose.theta != snap[i].pose.theta;
        b.pose = snap[i].pose;
        b.v = snap[i].v;
        b.w = snap[i].w;
        if (moved) b.update_world();
      }
    }
    const double worst = advance(world, tool, pivot, a, fractions[k], contacts);
    if (worst <= kPenetrationTol || fractions[k] == 0.0) break;
  }
  check_finite(world);
  world.time += world.dt;
  ++world.steps;
  return contacts;
}

}  // namespace gift
