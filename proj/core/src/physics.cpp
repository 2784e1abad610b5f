#include "cueplan/physics.hpp"

#include <algorithm>
#include <cmath>

#include "cueplan/errors.hpp"
#include "cueplan/trajectory.hpp"

namespace cueplan {

namespace {

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
    double v = cross(q - p, r - p);
    if (v > 0) return 1;
    if (v < 0) return -1;
    return 0;
  };
  int o1 = orient(a, b, c), o2 = orient(a, b, d);
  int o3 = orient(c, d, a), o4 = orient(c, d, b);
  return o1 != o2 && o3 != o4;
}

}  // namespace

double polygon_signed_area(const std::vector<Vec2>& poly) {
  double area = 0.0;
  size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    area += cross(poly[i], poly[(i + 1) % n]);
  }
  return 0.5 * area;
}

bool point_in_polygon(const std::vector<Vec2>& poly, Vec2 p) {
  // Even-odd crossing rule.
  bool inside = false;
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    Vec2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      double xint = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < xint) inside = !inside;
    }
  }
  return inside;
}

double distance_to_polygon_edges(const std::vector<Vec2>& poly, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    best = std::min(best, distance_to_segment(p, poly[i], poly[(i + 1) % n]));
  }
  return best;
}

Table make_table(std::vector<Vec2> vertices) {
  if (vertices.size() < 3) throw ValidationError("table polygon needs >= 3 vertices");
  for (Vec2 v : vertices) {
    if (!is_finite(v)) throw NonFiniteInput("table vertex not finite");
  }
  size_t n = vertices.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      // Skip adjacent edges (shared endpoint).
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j],
                             vertices[(j + 1) % n])) {
        throw ValidationError("table polygon self-intersects");
      }
    }
  }
  double area = polygon_signed_area(vertices);
  if (std::abs(area) < 1e-9) throw ValidationError("table polygon has empty interior");
  if (area < 0.0) std::reverse(vertices.begin(), vertices.end());

  Table t;
  t.vertices = std::move(vertices);
  t.bbox_min = t.bbox_max = t.vertices[0];
  for (Vec2 v : t.vertices) {
    t.bbox_min.x = std::min(t.bbox_min.x, v.x);
    t.bbox_min.y = std::min(t.bbox_min.y, v.y);
    t.bbox_max.x = std::max(t.bbox_max.x, v.x);
    t.bbox_max.y = std::max(t.bbox_max.y, v.y);
  }
  return t;
}

Table make_rect_table(double width, double height) {
  return make_table({{0.0, 0.0}, {width, 0.0}, {width, height}, {0.0, height}});
}

const Ball* WorldState::find_ball(int id) const {
  for (const Ball& b : balls) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

void validate_world(const WorldState& state) {
  for (const Ball& b : state.balls) {
    if (!is_finite(b.center) || !is_finite(b.velocity)) {
      throw NonFiniteInput("ball state not finite");
    }
    if (b.radius <= 0.0 || b.mass <= 0.0) {
      throw ValidationError("ball radius and mass must be positive");
    }
    if (!point_in_polygon(state.table.vertices, b.center) ||
        distance_to_polygon_edges(state.table.vertices, b.center) <
            b.radius - kContactTol) {
      throw ValidationError("ball not contained in table");
    }
  }
  for (size_t i = 0; i < state.balls.size(); ++i) {
    for (size_t j = i + 1; j < state.balls.size(); ++j) {
      double d = norm(state.balls[i].center - state.balls[j].center);
      if (d < state.balls[i].radius + state.balls[j].radius - kContactTol) {
        throw ValidationError("balls overlap");
      }
    }
  }
}

WorldState apply_force(const WorldState& state, int ball_id, Vec2 force,
                       const PhysicsParams& params) {
  if (!is_finite(force)) throw NonFiniteInput("force not finite");
  WorldState out = state;
  for (Ball& b : out.balls) {
    if (b.id == ball_id) {
      b.velocity += force * params.impulse_scale;
      return out;
    }
  }
  throw UnknownBall(ball_id);
}

std::optional<double> toi_circle_circle(const Ball& b1, const Ball& b2, double dt) {
  Vec2 d = b1.center - b2.center;
  Vec2 w = b1.velocity - b2.velocity;
  double r = b1.radius + b2.radius;
  double a = norm2(w);
  double b = dot(d, w);
  double c = norm2(d) - r * r;
  if (b >= 0.0) return std::nullopt;  // separating or parallel
  if (c <= 0.0) return 0.0;           // touching (or FP-slightly inside) and approaching
  if (a == 0.0) return std::nullopt;
  double disc = b * b - a * c;
  if (disc <= 0.0) return std::nullopt;
  double tau = (-b - std::sqrt(disc)) / a;
  if (tau >= 0.0 && tau < dt) return tau;
  return std::nullopt;
}

namespace {

// Earliest time a moving point comes within `r` of the fixed point `e`,
// approaching. Shared by ball-ball corner logic and endpoint contacts.
std::optional<double> toi_point(Vec2 center, Vec2 vel, Vec2 e, double r, double dt) {
  Vec2 d = center - e;
  double a = norm2(vel);
  double b = dot(d, vel);
  double c = norm2(d) - r * r;
  if (b >= 0.0) return std::nullopt;
  if (c <= 0.0) return 0.0;
  if (a == 0.0) return std::nullopt;
  double disc = b * b - a * c;
  if (disc <= 0.0) return std::nullopt;
  double tau = (-b - std::sqrt(disc)) / a;
  if (tau >= 0.0 && tau < dt) return tau;
  return std::nullopt;
}

struct SegmentHit {
  double tau;
  Vec2 normal;  // unit, pointing from the wall toward the ball
};

// Face and endpoint contact candidates against one directed edge (interior
// on the left). Returns the earliest approaching contact in [0, dt).
std::optional<SegmentHit> toi_segment_impl(const Ball& ball, Vec2 seg_a, Vec2 seg_b,
                                           double dt) {
  std::optional<SegmentHit> best;
  auto consider = [&](double tau, Vec2 normal) {
    if (!best || tau < best->tau) best = SegmentHit{tau, normal};
  };

  Vec2 ab = seg_b - seg_a;
  double len2 = norm2(ab);
  if (len2 > 0.0) {
    Vec2 n = normalized(perp(ab));  // interior side for CCW polygons
    double s0 = dot(ball.center - seg_a, n);
    double sv = dot(ball.velocity, n);
    if (sv < 0.0 && s0 >= ball.radius - kContactTol) {
      double tau = s0 <= ball.radius ? 0.0 : (ball.radius - s0) / sv;
      if (tau >= 0.0 && tau < dt) {
        // Contact point must project onto the segment, else it is a corner case.
        Vec2 c_at = ball.center + ball.velocity * tau;
        double u = dot(c_at - seg_a, ab) / len2;
        if (u >= 0.0 && u <= 1.0) consider(tau, n);
      }
    }
  }
  for (Vec2 e : {seg_a, seg_b}) {
    if (auto tau = toi_point(ball.center, ball.velocity, e, ball.radius, dt)) {
      Vec2 c_at = ball.center + ball.velocity * *tau;
      Vec2 n = normalized(c_at - e);
      if (n == Vec2{0.0, 0.0}) continue;  // degenerate: center on the corner
      consider(*tau, n);
    }
  }
  return best;
}

}  // namespace

std::optional<double> toi_circle_segment(const Ball& b, Vec2 seg_a, Vec2 seg_b,
                                         double dt) {
  auto hit = toi_segment_impl(b, seg_a, seg_b, dt);
  if (!hit) return std::nullopt;
  return hit->tau;
}

std::pair<Ball, Ball> resolve_ball_ball(const Ball& b1, const Ball& b2,
                                        double restitution) {
  Vec2 d = b2.center - b1.center;
  double dist = norm(d);
  double r = b1.radius + b2.radius;
  if (std::abs(dist - r) > kContactTol || dist == 0.0) {
    throw NotInContact("balls not in contact");
  }
  Vec2 n = d / dist;
  double closing = dot(b1.velocity - b2.velocity, n);
  if (closing <= 0.0) throw NotInContact("balls not closing");

  // Scalar impulse along n for a 1D elastic collision with restitution.
  double j = (1.0 + restitution) * closing * (b1.mass * b2.mass) / (b1.mass + b2.mass);
  Ball o1 = b1, o2 = b2;
  o1.velocity -= n * (j / b1.mass);
  o2.velocity += n * (j / b2.mass);
  return {o1, o2};
}

Ball resolve_ball_wall(const Ball& b, Vec2 edge_normal, double restitution) {
  double vn = dot(b.velocity, edge_normal);
  if (vn >= 0.0) throw NotInContact("ball not approaching wall");
  Ball out = b;
  out.velocity -= edge_normal * ((1.0 + restitution) * vn);
  return out;
}

namespace {

struct Candidate {
  double tau;
  CollisionKind kind;
  int a;  // ball index
  int b;  // other ball index or edge index
  Vec2 normal;  // wall contacts only
};

// Candidate ordering for simultaneous events: walls first, then lowest indices.
bool candidate_order(const Candidate& x, const Candidate& y) {
  if (x.kind != y.kind) return x.kind == CollisionKind::ball_wall;
  if (x.a != y.a) return x.a < y.a;
  return x.b < y.b;
}

}  // namespace

std::pair<WorldState, std::vector<CollisionEvent>> step(const WorldState& state,
                                                        const PhysicsParams& params) {
  WorldState cur = state;
  std::vector<CollisionEvent> events;
  double remaining = 1.0;
  double elapsed = 0.0;
  int applied = 0;
  int n = int(cur.balls.size());
  int ne = cur.table.edge_count();

  while (remaining > 0.0) {
    // Scan all pairs and edges for the earliest contact.
    std::vector<Candidate> cands;
    double tau_min = remaining;
    auto offer = [&](Candidate c) {
      cands.push_back(c);
      tau_min = std::min(tau_min, c.tau);
    };
    for (int i = 0; i < n; ++i) {
      for (int e = 0; e < ne; ++e) {
        auto [a, b] = cur.table.edge(e);
        if (auto hit = toi_segment_impl(cur.balls[i], a, b, remaining)) {
          offer({hit->tau, CollisionKind::ball_wall, i, e, hit->normal});
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (auto tau = toi_circle_circle(cur.balls[i], cur.balls[j], remaining)) {
          offer({*tau, CollisionKind::ball_ball, i, j, {}});
        }
      }
    }

    if (cands.empty()) {
      for (Ball& b : cur.balls) b.center += b.velocity * remaining;
      break;
    }

    // Advance to the earliest contact, then resolve everything that happens
    // within the simultaneity tolerance, walls before balls, lowest index
    // first. Each resolution is re-validated since an earlier one may have
    // deflected the participants.
    for (Ball& b : cur.balls) b.center += b.velocity * tau_min;

    std::vector<Candidate> now;
    for (const Candidate& c : cands) {
      if (c.tau <= tau_min + kSimultaneousTol) now.push_back(c);
    }
    std::sort(now.begin(), now.end(), candidate_order);

    for (const Candidate& c : now) {
      if (c.kind == CollisionKind::ball_wall) {
        Ball& b = cur.balls[c.a];
        if (dot(b.velocity, c.normal) >= 0.0) continue;  // already deflected
        b = resolve_ball_wall(b, c.normal, params.restitution);
      } else {
        Ball& b1 = cur.balls[c.a];
        Ball& b2 = cur.balls[c.b];
        Vec2 d = b2.center - b1.center;
        double dist = norm(d);
        if (dist == 0.0) continue;
        if (dot(b1.velocity - b2.velocity, d / dist) <= 0.0) continue;
        auto [r1, r2] = resolve_ball_ball(b1, b2, params.restitution);
        b1 = r1;
        b2 = r2;
      }
      if (++applied > params.max_events_per_step) throw EventOverflow(state.t);
      events.push_back({state.t, elapsed + tau_min, c.kind, c.a, c.b});
    }

    elapsed += tau_min;
    remaining -= tau_min;
  }

  if (params.damping != 0.0) {
    for (Ball& b : cur.balls) b.velocity *= (1.0 - params.damping);
  }
  cur.t = state.t + 1;
  return {std::move(cur), std::move(events)};
}

Trajectory simulate(const WorldState& state, const ForceMap& forces, int T,
                    const PhysicsParams& params) {
  if (T < 1) throw ValidationError("simulate requires T >= 1");
  WorldState cur = state;
  for (const auto& [id, f] : forces) {
    cur = apply_force(cur, id, f, params);
  }
  Trajectory traj;
  traj.table = cur.table;
  traj.forces_at_t0 = forces;
  traj.frames.reserve(size_t(T) + 1);
  traj.frames.push_back(cur.balls);
  for (int k = 0; k < T; ++k) {
    auto [next, evs] = step(cur, params);
    traj.events.insert(traj.events.end(), evs.begin(), evs.end());
    traj.frames.push_back(next.balls);
    cur = std::move(next);
  }
  return traj;
}

}  // namespace cueplan
