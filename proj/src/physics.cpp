#include "namo/physics.hpp"

#include <algorithm>
#include <cmath>

namespace namo {
namespace {

struct ContactPoint {
  Vec2 point;         // world
  Vec2 normal;        // world, from body A toward body B
  double penetration = 0.0;  // negative: separated but within the margin
};

// Detection margin for speculative contacts: impacts are seen one step early
// so the velocity solver stops bodies at touch instead of after ingress.
constexpr double kSpeculativeMargin = 0.03;

struct Manifold {
  int a = -1;               // body index (0 robot, 1.. boxes)
  int b = -1;               // body index, or -1 for a wall
  int wall = -1;            // wall index when b == -1
  int count = 0;
  ContactPoint points[2];
};

struct SolverBody {
  Vec2 pos;
  double theta;
  Vec2 vel;
  double omega;
  double inv_m;
  double inv_i;
  Vec2 half;
};

Vec2 body_frame_axis_x(double theta) { return {std::cos(theta), std::sin(theta)}; }

// --- rectangle vs rectangle (SAT + reference-face clipping) ---

struct RectFrame {
  Vec2 center;
  Vec2 ux, uy;  // world-frame unit axes
  Vec2 half;
};

RectFrame rect_frame(const SolverBody& b) {
  Vec2 ux = body_frame_axis_x(b.theta);
  return {b.pos, ux, ux.perp(), b.half};
}

Vec2 rect_corner(const RectFrame& r, int i) {
  // CCW from (+x, +y)
  static const double sx[4] = {1, -1, -1, 1};
  static const double sy[4] = {1, 1, -1, -1};
  return r.center + r.ux * (sx[i] * r.half.x) + r.uy * (sy[i] * r.half.y);
}

// Max separation of `b` from faces of `a`; face normals are +-ux, +-uy of a.
double max_face_separation(const RectFrame& a, const RectFrame& b, int* best_face) {
  double best = -1e30;
  for (int f = 0; f < 4; ++f) {
    Vec2 n = (f == 0) ? a.ux : (f == 1) ? -a.ux : (f == 2) ? a.uy : -a.uy;
    double face_offset = (f < 2) ? a.half.x : a.half.y;
    // smallest projection of b's corners onto n, relative to a's face plane
    double min_proj = 1e30;
    for (int i = 0; i < 4; ++i) {
      double proj = n.dot(rect_corner(b, i) - a.center);
      min_proj = std::min(min_proj, proj);
    }
    double sep = min_proj - face_offset;
    if (sep > best) {
      best = sep;
      *best_face = f;
    }
  }
  return best;
}

struct ClipVertex {
  Vec2 v;
  double sep;  // separation along reference normal (negative = penetrating)
};

int clip_segment(ClipVertex* out, const ClipVertex* in, const Vec2& n, double offset) {
  int count = 0;
  double d0 = n.dot(in[0].v) - offset;
  double d1 = n.dot(in[1].v) - offset;
  if (d0 <= 0.0) out[count++] = in[0];
  if (d1 <= 0.0) out[count++] = in[1];
  if (d0 * d1 < 0.0) {
    double t = d0 / (d0 - d1);
    out[count].v = in[0].v + (in[1].v - in[0].v) * t;
    out[count].sep = 0.0;
    ++count;
  }
  return count;
}

// margin > 0 inflates both shapes for detection; reported penetrations are
// relative to the true surfaces (negative up to -margin when separated).
bool collide_rects(const SolverBody& ba, const SolverBody& bb, Manifold* m,
                   double margin = 0.0) {
  RectFrame ra = rect_frame(ba);
  RectFrame rb = rect_frame(bb);
  if (margin > 0.0) {
    Vec2 pad{0.5 * margin, 0.5 * margin};
    ra.half += pad;
    rb.half += pad;
  }

  int face_a = 0, face_b = 0;
  double sep_a = max_face_separation(ra, rb, &face_a);
  if (sep_a > 0.0) return false;
  double sep_b = max_face_separation(rb, ra, &face_b);
  if (sep_b > 0.0) return false;

  // Reference rectangle owns the face of least penetration (deterministic
  // tie-break toward A).
  const RectFrame* ref;
  const RectFrame* inc;
  int ref_face;
  bool flip;
  if (sep_b > sep_a + 1e-10) {
    ref = &rb; inc = &ra; ref_face = face_b; flip = true;
  } else {
    ref = &ra; inc = &rb; ref_face = face_a; flip = false;
  }

  Vec2 n = (ref_face == 0) ? ref->ux : (ref_face == 1) ? -ref->ux
         : (ref_face == 2) ? ref->uy : -ref->uy;
  double face_offset = (ref_face < 2) ? ref->half.x : ref->half.y;

  // Incident face: the one most anti-parallel to n.
  Vec2 inc_axes[4] = {inc->ux, -inc->ux, inc->uy, -inc->uy};
  int inc_face = 0;
  double min_dot = 1e30;
  for (int f = 0; f < 4; ++f) {
    double d = n.dot(inc_axes[f]);
    if (d < min_dot) {
      min_dot = d;
      inc_face = f;
    }
  }
  // Endpoints of the incident face.
  static const int face_corners[4][2] = {{3, 0}, {1, 2}, {0, 1}, {2, 3}};
  ClipVertex incident[2];
  incident[0].v = rect_corner(*inc, face_corners[inc_face][0]);
  incident[1].v = rect_corner(*inc, face_corners[inc_face][1]);

  // Clip to the two side planes of the reference face.
  Vec2 side = n.perp();
  double side_half = (ref_face < 2) ? ref->half.y : ref->half.x;
  double upper = side.dot(ref->center) + side_half;
  double lower = -side.dot(ref->center) + side_half;

  ClipVertex clipped1[2], clipped2[2];
  if (clip_segment(clipped1, incident, side, upper) < 2) return false;
  if (clip_segment(clipped2, clipped1, -side, lower) < 2) return false;

  double plane = n.dot(ref->center) + face_offset;
  m->count = 0;
  for (int i = 0; i < 2; ++i) {
    double sep = n.dot(clipped2[i].v) - plane;
    if (sep <= 0.0) {
      ContactPoint& cp = m->points[m->count++];
      cp.point = clipped2[i].v;
      cp.normal = flip ? -n : n;  // from A to B
      cp.penetration = -sep - margin;
    }
  }
  return m->count > 0;
}

// --- rectangle vs wall capsule ---

// Distance from a point (in rect local frame) to the solid rectangle.
double point_rect_distance_local(const Vec2& p, const Vec2& half, Vec2* closest) {
  Vec2 c{clamp(p.x, -half.x, half.x), clamp(p.y, -half.y, half.y)};
  *closest = c;
  return (p - c).norm();
}

// Minimizes the distance from the segment [p0,p1] (local frame) to the solid
// rectangle. The squared distance is piecewise quadratic in t with breakpoints
// where the segment crosses the slab lines x = +-hx, y = +-hy.
double segment_rect_min(const Vec2& p0, const Vec2& p1, const Vec2& half, double* t_best) {
  Vec2 d = p1 - p0;
  double ts[10];
  int nts = 0;
  ts[nts++] = 0.0;
  ts[nts++] = 1.0;
  auto add_crossing = [&](double coord0, double dcoord, double bound) {
    if (std::abs(dcoord) > 1e-12) {
      for (double b : {bound, -bound}) {
        double t = (b - coord0) / dcoord;
        if (t > 0.0 && t < 1.0) ts[nts++] = t;
      }
    }
  };
  add_crossing(p0.x, d.x, half.x);
  add_crossing(p0.y, d.y, half.y);
  std::sort(ts, ts + nts);

  double best = 1e30;
  *t_best = 0.0;
  for (int i = 0; i + 1 < nts; ++i) {
    double t0 = ts[i], t1 = ts[i + 1];
    if (t1 - t0 < 1e-12) continue;
    // On this subinterval the clamp pattern is constant; dist^2 is quadratic.
    double tm = 0.5 * (t0 + t1);
    Vec2 pm = p0 + d * tm;
    Vec2 ex{pm.x > half.x ? 1.0 : (pm.x < -half.x ? -1.0 : 0.0),
            pm.y > half.y ? 1.0 : (pm.y < -half.y ? -1.0 : 0.0)};
    // excess(t) = (sign_x*(x(t) -+ hx), sign_y*(y(t) -+ hy)) on active axes
    auto dist_sq_at = [&](double t) {
      Vec2 p = p0 + d * t;
      double dx = ex.x != 0.0 ? p.x - ex.x * half.x : 0.0;
      double dy = ex.y != 0.0 ? p.y - ex.y * half.y : 0.0;
      return dx * dx + dy * dy;
    };
    // Quadratic a t^2 + b t + c over active axes; vertex at -b/2a.
    double a = (ex.x != 0.0 ? d.x * d.x : 0.0) + (ex.y != 0.0 ? d.y * d.y : 0.0);
    double cand = tm;
    if (a > 1e-12) {
      double bx = ex.x != 0.0 ? (p0.x - ex.x * half.x) * d.x : 0.0;
      double by = ex.y != 0.0 ? (p0.y - ex.y * half.y) * d.y : 0.0;
      cand = clamp(-(bx + by) / a, t0, t1);
    }
    for (double t : {t0, cand, t1}) {
      double ds = dist_sq_at(t);
      if (ds < best - 1e-15) {
        best = ds;
        *t_best = t;
      }
    }
  }
  return std::sqrt(std::max(best, 0.0));
}

// Contact normal/penetration for one segment point against the rectangle
// (capsule radius r). Handles points inside the rectangle via nearest face.
bool capsule_point_contact(const Vec2& p_local, const Vec2& half, double r,
                           const SolverBody& rect, ContactPoint* cp) {
  Vec2 ux = body_frame_axis_x(rect.theta);
  Vec2 uy = ux.perp();
  Vec2 closest;
  double dist = point_rect_distance_local(p_local, half, &closest);
  Vec2 n_local;
  double pen;
  if (dist > 1e-9) {
    if (dist >= r) return false;
    n_local = (p_local - closest) * (1.0 / dist);
    pen = r - dist;
  } else {
    // Inside: push out through the nearest face.
    double dx = half.x - std::abs(p_local.x);
    double dy = half.y - std::abs(p_local.y);
    if (dx < dy) {
      n_local = {p_local.x >= 0 ? 1.0 : -1.0, 0.0};
      pen = r + dx;
    } else {
      n_local = {0.0, p_local.y >= 0 ? 1.0 : -1.0};
      pen = r + dy;
    }
    closest = {clamp(p_local.x, -half.x, half.x), clamp(p_local.y, -half.y, half.y)};
  }
  cp->normal = ux * n_local.x + uy * n_local.y;  // from rect toward wall
  cp->point = rect.pos + ux * closest.x + uy * closest.y;
  cp->penetration = pen;
  return true;
}

bool collide_rect_wall(const SolverBody& rect, const WallSegment& wall, Manifold* m,
                       double margin = 0.0) {
  Vec2 ux = body_frame_axis_x(rect.theta);
  Vec2 uy = ux.perp();
  Vec2 p0{ux.dot(wall.a - rect.pos), uy.dot(wall.a - rect.pos)};
  Vec2 p1{ux.dot(wall.b - rect.pos), uy.dot(wall.b - rect.pos)};
  double r = wall.radius() + margin;

  // Reject far segments cheaply.
  double reach = rect.half.norm() + r;
  if (std::min(p0.x, p1.x) > reach || std::max(p0.x, p1.x) < -reach ||
      std::min(p0.y, p1.y) > reach || std::max(p0.y, p1.y) < -reach) {
    return false;
  }

  // Clip segment parameter range to the r-expanded slabs.
  Vec2 d = p1 - p0;
  double t0 = 0.0, t1 = 1.0;
  auto clip_slab = [&](double c0, double dc, double bound) {
    if (std::abs(dc) < 1e-12) return c0 >= -bound && c0 <= bound;
    double ta = (-bound - c0) / dc;
    double tb = (bound - c0) / dc;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    return t0 <= t1;
  };
  if (!clip_slab(p0.x, d.x, rect.half.x + r) || !clip_slab(p0.y, d.y, rect.half.y + r)) {
    return false;
  }

  m->count = 0;
  Vec2 e0 = p0 + d * t0;
  Vec2 e1 = p0 + d * t1;
  Vec2 c0, c1;
  double dist0 = point_rect_distance_local(e0, rect.half, &c0);
  double dist1 = point_rect_distance_local(e1, rect.half, &c1);
  bool in0 = dist0 < 1e-9, in1 = dist1 < 1e-9;

  if ((dist0 < r || in0) && (dist1 < r || in1) && (t1 - t0) > 1e-9) {
    // Both clipped endpoints touch: two-point (face-style) manifold.
    ContactPoint cp;
    if (capsule_point_contact(e0, rect.half, r, rect, &cp)) m->points[m->count++] = cp;
    if (capsule_point_contact(e1, rect.half, r, rect, &cp)) m->points[m->count++] = cp;
  } else {
    double t_best;
    double dist = segment_rect_min(p0, p1, rect.half, &t_best);
    if (dist < r) {
      ContactPoint cp;
      if (capsule_point_contact(p0 + d * t_best, rect.half, r, rect, &cp)) {
        m->points[m->count++] = cp;
      }
    }
  }
  for (int k = 0; k < m->count; ++k) m->points[k].penetration -= margin;
  return m->count > 0;
}

// --- solver ---

void gather_bodies(const WorldState& world, std::vector<SolverBody>& bodies,
                   std::vector<int>& slot_of_body) {
  bodies.clear();
  slot_of_body.clear();
  const RigidBody2D& r = world.robot;
  bodies.push_back({r.pose.position(), r.pose.theta, r.linear_velocity,
                    r.angular_velocity, r.inv_mass(), r.inv_inertia(), r.half_extents});
  slot_of_body.push_back(-1);
  for (size_t i = 0; i < world.boxes.size(); ++i) {
    if (!world.box_present[i]) continue;
    const RigidBody2D& b = world.boxes[i];
    bodies.push_back({b.pose.position(), b.pose.theta, b.linear_velocity,
                      b.angular_velocity, b.inv_mass(), b.inv_inertia(), b.half_extents});
    slot_of_body.push_back(static_cast<int>(i));
  }
}

void find_contacts(const std::vector<SolverBody>& bodies,
                   const std::vector<WallSegment>& walls,
                   std::vector<Manifold>& out, double margin = 0.0) {
  out.clear();
  int n = static_cast<int>(bodies.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      Manifold m;
      if (collide_rects(bodies[i], bodies[j], &m, margin)) {
        m.a = i;
        m.b = j;
        out.push_back(m);
      }
    }
    for (size_t w = 0; w < walls.size(); ++w) {
      Manifold m;
      if (collide_rect_wall(bodies[i], walls[w], &m, margin)) {
        m.a = i;
        m.b = -1;
        m.wall = static_cast<int>(w);
        out.push_back(m);
      }
    }
  }
}

struct VelocityConstraint {
  int a, b;  // b == -1: static wall
  Vec2 normal, tangent;
  Vec2 ra, rb;
  double mass_n, mass_t;
  double impulse_n = 0.0, impulse_t = 0.0;
  double bias = 0.0;  // Baumgarte separating-velocity target
  int64_t key = 0;
  Vec2 local_a;  // contact point in A's frame, for cache matching
};

// Pair key from stable slot ids (robot 0, box slot+1, wall 1000+index).
int64_t pair_key(int a_id, int b_id) { return static_cast<int64_t>(a_id) * 4096 + b_id; }

constexpr double kCacheMatchDistSq = 0.02 * 0.02;

void solve_velocities(std::vector<SolverBody>& bodies,
                      const std::vector<Manifold>& manifolds,
                      const std::vector<int>& slot_of_body,
                      const PhysicsParams& p, std::vector<CachedContact>& cache) {
  const int iterations = p.velocity_iterations;
  const double friction = p.contact_friction;
  std::vector<VelocityConstraint> vcs;
  for (const Manifold& m : manifolds) {
    const SolverBody& A = bodies[m.a];
    Vec2 a_ux = body_frame_axis_x(A.theta);
    int a_id = slot_of_body[m.a] + 1;  // robot slot is -1 -> id 0
    int b_id = m.b >= 0 ? slot_of_body[m.b] + 1 : 1000 + m.wall;
    int64_t key = pair_key(a_id, b_id);
    for (int k = 0; k < m.count; ++k) {
      const ContactPoint& cp = m.points[k];
      VelocityConstraint vc;
      vc.a = m.a;
      vc.b = m.b;
      vc.key = key;
      vc.normal = cp.normal;
      vc.tangent = cp.normal.perp();
      if (cp.penetration >= 0.0) {
        vc.bias = std::min(
            p.baumgarte / p.dt * std::max(cp.penetration - p.penetration_slop, 0.0), 0.5);
      } else {
        vc.bias = cp.penetration / p.dt;  // speculative: may close the gap, no more
      }
      vc.ra = cp.point - A.pos;
      vc.local_a = {a_ux.dot(vc.ra), a_ux.perp().dot(vc.ra)};
      double inv_b_m = 0.0, inv_b_i = 0.0;
      if (m.b >= 0) {
        const SolverBody& B = bodies[m.b];
        vc.rb = cp.point - B.pos;
        inv_b_m = B.inv_m;
        inv_b_i = B.inv_i;
      }
      double rna = vc.ra.cross(vc.normal);
      double rnb = m.b >= 0 ? vc.rb.cross(vc.normal) : 0.0;
      double kn = A.inv_m + inv_b_m + A.inv_i * rna * rna + inv_b_i * rnb * rnb;
      double rta = vc.ra.cross(vc.tangent);
      double rtb = m.b >= 0 ? vc.rb.cross(vc.tangent) : 0.0;
      double kt = A.inv_m + inv_b_m + A.inv_i * rta * rta + inv_b_i * rtb * rtb;
      vc.mass_n = kn > 0.0 ? 1.0 / kn : 0.0;
      vc.mass_t = kt > 0.0 ? 1.0 / kt : 0.0;

      // Warm start from last step's impulse at the matching cached point.
      for (const CachedContact& cc : cache) {
        if (cc.key != key) continue;
        if ((cc.local_point - vc.local_a).norm_sq() > kCacheMatchDistSq) continue;
        vc.impulse_n = cc.impulse_n;
        vc.impulse_t = cc.impulse_t;
        break;
      }
      if (vc.impulse_n != 0.0 || vc.impulse_t != 0.0) {
        Vec2 p = vc.normal * vc.impulse_n + vc.tangent * vc.impulse_t;
        SolverBody& Am = bodies[vc.a];
        Am.vel -= p * Am.inv_m;
        Am.omega -= Am.inv_i * vc.ra.cross(p);
        if (vc.b >= 0) {
          SolverBody& Bm = bodies[vc.b];
          Bm.vel += p * Bm.inv_m;
          Bm.omega += Bm.inv_i * vc.rb.cross(p);
        }
      }
      vcs.push_back(vc);
    }
  }

  for (int it = 0; it < iterations; ++it) {
    for (VelocityConstraint& vc : vcs) {
      SolverBody& A = bodies[vc.a];
      SolverBody* B = vc.b >= 0 ? &bodies[vc.b] : nullptr;

      auto rel_velocity = [&]() {
        Vec2 va = A.vel + Vec2{-A.omega * vc.ra.y, A.omega * vc.ra.x};
        Vec2 vb = B ? B->vel + Vec2{-B->omega * vc.rb.y, B->omega * vc.rb.x} : Vec2{};
        return vb - va;
      };

      // Normal: inelastic; the bias pumps residual penetration out.
      double vn = rel_velocity().dot(vc.normal);
      double dn = (vc.bias - vn) * vc.mass_n;
      double new_n = std::max(vc.impulse_n + dn, 0.0);
      dn = new_n - vc.impulse_n;
      vc.impulse_n = new_n;
      Vec2 pn = vc.normal * dn;
      A.vel -= pn * A.inv_m;
      A.omega -= A.inv_i * vc.ra.cross(pn);
      if (B) {
        B->vel += pn * B->inv_m;
        B->omega += B->inv_i * vc.rb.cross(pn);
      }

      // Friction clamped by the normal impulse.
      double vt = rel_velocity().dot(vc.tangent);
      double dt_imp = -vt * vc.mass_t;
      double max_f = friction * vc.impulse_n;
      double new_t = clamp(vc.impulse_t + dt_imp, -max_f, max_f);
      dt_imp = new_t - vc.impulse_t;
      vc.impulse_t = new_t;
      Vec2 pt = vc.tangent * dt_imp;
      A.vel -= pt * A.inv_m;
      A.omega -= A.inv_i * vc.ra.cross(pt);
      if (B) {
        B->vel += pt * B->inv_m;
        B->omega += B->inv_i * vc.rb.cross(pt);
      }
    }
  }

  cache.clear();
  for (const VelocityConstraint& vc : vcs) {
    cache.push_back({vc.key, vc.local_a, vc.impulse_n, vc.impulse_t});
  }
}

void correct_positions(std::vector<SolverBody>& bodies,
                       const std::vector<WallSegment>& walls,
                       const PhysicsParams& p) {
  std::vector<Manifold> manifolds;
  for (int it = 0; it < p.position_iterations; ++it) {
    find_contacts(bodies, walls, manifolds);
    if (manifolds.empty()) return;
    for (const Manifold& m : manifolds) {
      for (int k = 0; k < m.count; ++k) {
        const ContactPoint& cp = m.points[k];
        double c = std::max(cp.penetration - p.penetration_slop, 0.0);
        if (c <= 0.0) continue;
        double correction = std::min(p.baumgarte * c, 0.05);
        SolverBody& A = bodies[m.a];
        SolverBody* B = m.b >= 0 ? &bodies[m.b] : nullptr;
        Vec2 ra = cp.point - A.pos;
        Vec2 rb = B ? cp.point - B->pos : Vec2{};
        double rna = ra.cross(cp.normal);
        double rnb = B ? rb.cross(cp.normal) : 0.0;
        double kn = A.inv_m + (B ? B->inv_m : 0.0) + A.inv_i * rna * rna +
                    (B ? B->inv_i * rnb * rnb : 0.0);
        if (kn <= 0.0) continue;
        double lambda = correction / kn;
        Vec2 impulse = cp.normal * lambda;
        A.pos -= impulse * A.inv_m;
        A.theta = wrap_angle(A.theta - A.inv_i * ra.cross(impulse));
        if (B) {
          B->pos += impulse * B->inv_m;
          B->theta = wrap_angle(B->theta + B->inv_i * rb.cross(impulse));
        }
      }
    }
  }
}

void scatter_bodies(const std::vector<SolverBody>& bodies,
                    const std::vector<int>& slot_of_body, WorldState& world) {
  world.robot.pose = {bodies[0].pos.x, bodies[0].pos.y, wrap_angle(bodies[0].theta)};
  world.robot.linear_velocity = bodies[0].vel;
  world.robot.angular_velocity = bodies[0].omega;
  for (size_t i = 1; i < bodies.size(); ++i) {
    RigidBody2D& box = world.boxes[slot_of_body[i]];
    box.pose = {bodies[i].pos.x, bodies[i].pos.y, wrap_angle(bodies[i].theta)};
    box.linear_velocity = bodies[i].vel;
    box.angular_velocity = bodies[i].omega;
  }
}

}  // namespace

RigidBody2D make_robot_body(const PhysicsParams& p, const Pose2D& pose) {
  RigidBody2D b;
  b.pose = pose;
  b.half_extents = {0.5 * p.robot_length, 0.5 * p.robot_width};
  b.mass = p.robot_mass;
  b.inertia = p.robot_inertia();
  b.movable = true;
  return b;
}

RigidBody2D make_box_body(const PhysicsParams& p, const Pose2D& pose) {
  RigidBody2D b;
  b.pose = pose;
  b.half_extents = {0.5 * p.box_size, 0.5 * p.box_size};
  b.mass = p.box_mass;
  b.inertia = p.box_inertia();
  b.movable = true;
  return b;
}

std::array<Vec2, 4> body_vertices(const RigidBody2D& body) {
  Rot2 r = Rot2::from_angle(body.pose.theta);
  Vec2 c = body.pose.position();
  const Vec2& h = body.half_extents;
  return {c + r.rotate({h.x, h.y}), c + r.rotate({-h.x, h.y}),
          c + r.rotate({-h.x, -h.y}), c + r.rotate({h.x, -h.y})};
}

static void check_action(const Action& action) {
  if (!std::isfinite(action.v_x) || !std::isfinite(action.theta_dot_z)) {
    throw InvalidActionError("non-finite action component");
  }
}

RigidBody2D integrate_unicycle(const RigidBody2D& robot, const Action& action,
                               double dt, const PhysicsParams& params) {
  check_action(action);
  if (dt <= 0.0) throw ContractViolation("integrate_unicycle: dt must be > 0");

  RigidBody2D out = robot;
  Vec2 heading = body_frame_axis_x(robot.pose.theta);
  double fwd = robot.linear_velocity.dot(heading);

  double v_target = clamp(action.v_x, params.v_min, params.v_max);
  double w_target = clamp(action.theta_dot_z, -params.omega_max, params.omega_max);
  double v = move_toward(fwd, v_target, params.accel_limit * dt);
  double w = move_toward(robot.angular_velocity, w_target, params.yaw_accel_limit * dt);

  out.pose.x += v * std::cos(robot.pose.theta) * dt;
  out.pose.y += v * std::sin(robot.pose.theta) * dt;
  out.pose.theta = wrap_angle(robot.pose.theta + w * dt);
  out.linear_velocity = body_frame_axis_x(out.pose.theta) * v;
  out.angular_velocity = w;
  return out;
}

ContactReport step_world(WorldState& world, const Action& action,
                         const PhysicsParams& p, StepFeedback* feedback) {
  check_action(action);
  double dt = p.dt;

  std::vector<SolverBody> bodies;
  std::vector<int> slots;
  gather_bodies(world, bodies, slots);
  SolverBody& robot = bodies[0];

  // Drive: slew the commanded velocity, then force-track it with capped
  // impulses so the robot can be blocked.
  world.cmd_speed = move_toward(world.cmd_speed,
                                clamp(action.v_x, p.v_min, p.v_max),
                                p.accel_limit * dt);
  world.cmd_yaw_rate = move_toward(world.cmd_yaw_rate,
                                   clamp(action.theta_dot_z, -p.omega_max, p.omega_max),
                                   p.yaw_accel_limit * dt);
  {
    Vec2 heading = body_frame_axis_x(robot.theta);
    Vec2 v_des = heading * world.cmd_speed;  // lateral component commanded to zero
    Vec2 j = (v_des - robot.vel) * p.robot_mass;
    double j_max = p.drive_force_max * dt;
    double jn = j.norm();
    if (jn > j_max) j *= j_max / jn;
    robot.vel += j * robot.inv_m;

    double l = (world.cmd_yaw_rate - robot.omega) / robot.inv_i;
    double l_max = p.drive_torque_max * dt;
    l = clamp(l, -l_max, l_max);
    robot.omega += l * robot.inv_i;
  }

  // Coulomb floor friction on boxes (linear + spin).
  for (size_t i = 1; i < bodies.size(); ++i) {
    SolverBody& b = bodies[i];
    double decel = p.floor_friction * p.gravity * dt;
    double speed = b.vel.norm();
    if (speed <= decel) {
      b.vel = {0.0, 0.0};
    } else {
      b.vel -= b.vel * (decel / speed);
    }
    double spin_arm = 0.38 * (b.half.x + b.half.y);
    double torque = p.floor_friction * (1.0 / b.inv_m) * p.gravity * spin_arm;
    double domega = torque * b.inv_i * dt;
    if (std::abs(b.omega) <= domega) {
      b.omega = 0.0;
    } else {
      b.omega -= domega * (b.omega > 0 ? 1.0 : -1.0);
    }
  }

  // Contacts on the pre-integration configuration.
  std::vector<Manifold> manifolds;
  find_contacts(bodies, world.walls, manifolds);
  solve_velocities(bodies, manifolds, slots, p, world.contact_cache);

  for (SolverBody& b : bodies) {
    b.pos += b.vel * dt;
    b.theta = wrap_angle(b.theta + b.omega * dt);
  }

  correct_positions(bodies, world.walls, p);

  // Report from the final configuration.
  ContactReport report;
  std::vector<Manifold> post;
  find_contacts(bodies, world.walls, post);
  for (const Manifold& m : post) {
    for (int k = 0; k < m.count; ++k) {
      report.max_penetration = std::max(report.max_penetration, m.points[k].penetration);
    }
    bool wall = m.b < 0;
    if (m.a == 0 && wall) report.robot_wall_contact = true;
    if (m.a == 0 && !wall) report.robot_box_contacts.push_back(slots[m.b]);
    if (m.a > 0 && wall) report.box_wall_contacts.push_back(slots[m.a]);
  }
  // Contacts found during the velocity pass also count (they may separate by
  // the end of the step but still produced forces this step).
  for (const Manifold& m : manifolds) {
    bool wall = m.b < 0;
    if (m.a == 0 && wall) report.robot_wall_contact = true;
    if (m.a == 0 && !wall) report.robot_box_contacts.push_back(slots[m.b]);
    if (m.a > 0 && wall) report.box_wall_contacts.push_back(slots[m.a]);
  }
  auto dedupe = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedupe(report.robot_box_contacts);
  dedupe(report.box_wall_contacts);

  if (feedback) {
    Vec2 heading = body_frame_axis_x(bodies[0].theta);
    feedback->actual_speed = bodies[0].vel.dot(heading);
    feedback->actual_yaw_rate = bodies[0].omega;
  }

  scatter_bodies(bodies, slots, world);
  world.time += dt;
  return report;
}

bool point_in_body(const RigidBody2D& body, const Vec2& p) {
  Rot2 r = Rot2::from_angle(body.pose.theta);
  Vec2 local = r.unrotate(p - body.pose.position());
  return std::abs(local.x) <= body.half_extents.x && std::abs(local.y) <= body.half_extents.y;
}

double segment_point_distance(const Vec2& a, const Vec2& b, const Vec2& p) {
  Vec2 ab = b - a;
  double len_sq = ab.norm_sq();
  double t = len_sq > 0.0 ? clamp((p - a).dot(ab) / len_sq, 0.0, 1.0) : 0.0;
  return (p - (a + ab * t)).norm();
}

bool bodies_overlap(const RigidBody2D& a, const RigidBody2D& b, double margin) {
  SolverBody sa{a.pose.position(), a.pose.theta, {}, 0, 0, 0,
                a.half_extents + Vec2{0.5 * margin, 0.5 * margin}};
  SolverBody sb{b.pose.position(), b.pose.theta, {}, 0, 0, 0,
                b.half_extents + Vec2{0.5 * margin, 0.5 * margin}};
  Manifold m;
  return collide_rects(sa, sb, &m);
}

bool body_wall_overlap(const RigidBody2D& a, const WallSegment& w, double margin) {
  SolverBody sa{a.pose.position(), a.pose.theta, {}, 0, 0, 0, a.half_extents};
  WallSegment inflated = w;
  inflated.thickness += 2.0 * margin;
  Manifold m;
  return collide_rect_wall(sa, inflated, &m);
}

double max_world_penetration(const WorldState& world) {
  std::vector<SolverBody> bodies;
  std::vector<int> slots;
  gather_bodies(world, bodies, slots);
  std::vector<Manifold> manifolds;
  find_contacts(bodies, world.walls, manifolds);
  double worst = 0.0;
  for (const Manifold& m : manifolds) {
    for (int k = 0; k < m.count; ++k) {
      worst = std::max(worst, m.points[k].penetration);
    }
  }
  return worst;
}

}  // namespace namo
