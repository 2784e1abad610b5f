#pragma once

#include <array>

#include "cueplan/image.hpp"
#include "cueplan/trajectory.hpp"

namespace cueplan {

/// Fixed grayscale palette. Values chosen to be mutually distinguishable and
/// stable so rendered images can be golden-tested.
constexpr double kBallIntensity = 1.0;
constexpr double kWallIntensity = 0.6;
constexpr double kInteriorIntensity = 0.0;
constexpr double kExteriorIntensity = 0.3;
/// Wall lines are 3 device pixels wide (half-width 1.5) at any zoom.
constexpr double kWallHalfWidth = 1.5;

/// Square window of side `size` world px centered at `center`.
struct Viewport {
  Vec2 center;
  double size = 0.0;
};

/// Rasterizes the world into a resolution x resolution grayscale image.
/// Geometry is expressed relative to the viewport center before rasterizing,
/// so two worlds that differ by a pure translation of everything (including
/// the viewport) produce identical pixels. Layers, back to front: exterior,
/// table interior, 3-px wall lines along polygon edges, anti-aliased ball
/// disks. Image rows run along +y in world coordinates.
Image render_frame(const WorldState& state, const Viewport& viewport, int resolution);

/// Object-centered view: render_frame at native scale (1 device px = 1 world
/// px, side glimpse_size) centered on the ball, then area-downsampled to
/// resolution x resolution. The fixated ball always lands in the center.
Image glimpse(const WorldState& state, int ball_id, int glimpse_size, int resolution);

/// Whole-table view: the table bounding box is fit into the image preserving
/// aspect ratio; the shorter dimension is letterboxed with the exterior value.
Image render_frame_centric(const WorldState& state, int resolution);

/// Four consecutive glimpses of one ball, each centered on the ball's
/// position at its own time, plus the force acting on that ball at t.
struct GlimpseStack {
  std::array<Image, 4> frames;  // t-3, t-2, t-1, t
  Vec2 force;                   // Newtons; zero except at t=0
  int ball_id = 0;
};

/// Frames at t-3..t. History before the first frame is padded by repeating
/// frame 0. The force is taken from the trajectory's t=0 force map when
/// t == 0 and is zero otherwise.
GlimpseStack glimpse_stack(const Trajectory& traj, int ball_id, int t,
                           int glimpse_size, int resolution);

}  // namespace cueplan
