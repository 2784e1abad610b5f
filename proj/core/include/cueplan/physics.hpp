#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "cueplan/vec2.hpp"

namespace cueplan {

inline constexpr double kDefaultBallRadius = 25.0;
inline constexpr double kPenetrationEps = 1e-9;   // allowed pairwise slack, px
inline constexpr double kContactTol = 1e-6;       // contact assertion tolerance, px
inline constexpr double kSimultaneousTol = 1e-9;  // events within this step fraction tie-break

/// Uniform density, normalized so a radius-25 ball has unit mass.
inline double ball_mass_for_radius(double r) {
  double s = r / kDefaultBallRadius;
  return s * s;
}

struct Ball {
  int id = 0;
  Vec2 center;
  Vec2 velocity;  // px/step
  double radius = kDefaultBallRadius;
  double mass = 1.0;
};

/// Simple closed polygon whose edges are the walls. Vertices are normalized
/// to counter-clockwise order at construction; interior lies left of each
/// directed edge.
struct Table {
  std::vector<Vec2> vertices;
  Vec2 bbox_min;
  Vec2 bbox_max;

  int edge_count() const { return int(vertices.size()); }
  std::pair<Vec2, Vec2> edge(int i) const {
    return {vertices[i], vertices[(i + 1) % vertices.size()]};
  }
  /// Unit normal of edge i pointing into the interior.
  Vec2 inward_normal(int i) const {
    auto [a, b] = edge(i);
    return normalized(perp(b - a));
  }
};

/// Validates simplicity and non-empty interior; reorders to CCW if needed.
Table make_table(std::vector<Vec2> vertices);
Table make_rect_table(double width, double height);

struct WorldState {
  std::vector<Ball> balls;
  Table table;
  int t = 0;

  const Ball* find_ball(int id) const;
};

enum class CollisionKind : uint8_t { ball_ball = 0, ball_wall = 1 };

struct CollisionEvent {
  int step = 0;              // index of the unit step during which it occurred
  double toi_fraction = 0.0; // position within that step, in [0, 1)
  CollisionKind kind = CollisionKind::ball_ball;
  int a = 0;  // ball index
  int b = 0;  // other ball index, or wall edge index
};

struct PhysicsParams {
  double restitution = 1.0;
  double damping = 0.0;                  // multiplicative per-step velocity loss
  double impulse_scale = 1.0 / 8000.0;   // px/step per Newton
  int max_events_per_step = 8;
};

/// Geometry helpers shared with worldgen and render.
bool point_in_polygon(const std::vector<Vec2>& poly, Vec2 p);
double polygon_signed_area(const std::vector<Vec2>& poly);
/// Distance from p to the nearest polygon edge segment.
double distance_to_polygon_edges(const std::vector<Vec2>& poly, Vec2 p);

/// Throws ValidationError when containment or pairwise-overlap invariants are
/// violated.
void validate_world(const WorldState& state);

using ForceMap = std::map<int, Vec2>;  // ball id -> force in Newtons

/// Instantaneous impulse: velocity of `ball_id` incremented by
/// impulse_scale * force. Pure; returns the updated state.
WorldState apply_force(const WorldState& state, int ball_id, Vec2 force,
                       const PhysicsParams& params);

/// Earliest contact time of two moving discs within [0, dt), if they are
/// approaching at contact. Returns nothing for separating or missed pairs.
std::optional<double> toi_circle_circle(const Ball& b1, const Ball& b2, double dt);

/// Earliest contact time of a disc with a wall segment (face or endpoint
/// contact) within [0, dt), approaching only.
std::optional<double> toi_circle_segment(const Ball& b, Vec2 seg_a, Vec2 seg_b,
                                         double dt);

/// Elastic 1D exchange along the contact normal; tangential components kept.
/// Requires contact within kContactTol and positive closing speed.
std::pair<Ball, Ball> resolve_ball_ball(const Ball& b1, const Ball& b2,
                                        double restitution);

/// Reflects the normal velocity component, scaled by restitution.
/// `edge_normal` must be unit length and point away from the wall.
Ball resolve_ball_wall(const Ball& b, Vec2 edge_normal, double restitution);

/// Advances exactly one unit step with chronological exact-TOI event
/// processing. Deterministic; throws EventOverflow past
/// params.max_events_per_step events.
std::pair<WorldState, std::vector<CollisionEvent>> step(const WorldState& state,
                                                        const PhysicsParams& params);

struct Trajectory;  // trajectory.hpp

/// Applies forces at t=0, then steps T times. Records T+1 frames and all
/// collision events.
Trajectory simulate(const WorldState& state, const ForceMap& forces, int T,
                    const PhysicsParams& params);

}  // namespace cueplan
