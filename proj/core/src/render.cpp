#include "cueplan/render.hpp"

#include <algorithm>
#include <cmath>

#include "cueplan/errors.hpp"

namespace cueplan {

namespace {

// Paints `value` over the pixel with the given coverage in [0,1].
inline void blend(double& px, double value, double coverage) {
  px += (value - px) * coverage;
}

void fill_interior(Image& img, const std::vector<Vec2>& poly) {
  int res = img.width;
  std::vector<double> xs;
  for (int y = 0; y < res; ++y) {
    double sy = y + 0.5;
    xs.clear();
    size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
      Vec2 a = poly[i], b = poly[j];
      if ((a.y > sy) != (b.y > sy)) {
        xs.push_back(a.x + (sy - a.y) / (b.y - a.y) * (b.x - a.x));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Pixel x is inside when its center x+0.5 lies in [xs[k], xs[k+1]).
      int x0 = std::max(0, int(std::ceil(xs[k] - 0.5)));
      int x1 = std::min(res, int(std::ceil(xs[k + 1] - 0.5)));
      for (int x = x0; x < x1; ++x) img.at(x, y) = kInteriorIntensity;
    }
  }
}

void draw_wall(Image& img, Vec2 a, Vec2 b) {
  int res = img.width;
  double reach = kWallHalfWidth + 0.5;  // line half-width plus the AA ramp
  int y0 = std::max(0, int(std::floor(std::min(a.y, b.y) - reach)));
  int y1 = std::min(res - 1, int(std::ceil(std::max(a.y, b.y) + reach)));
  Vec2 ab = b - a;
  double len2 = norm2(ab);
  for (int y = y0; y <= y1; ++y) {
    double sy = y + 0.5;
    // Conservative x-interval where the capsule around ab can reach this row.
    double lo = std::min(a.x, b.x) - reach;
    double hi = std::max(a.x, b.x) + reach;
    if (std::abs(ab.y) > 1e-12 && len2 > 0.0) {
      // Clip to the slab swept by the segment across rows sy +- reach.
      double t0 = (sy - reach - a.y) / ab.y;
      double t1 = (sy + reach - a.y) / ab.y;
      if (t0 > t1) std::swap(t0, t1);
      t0 = std::clamp(t0, 0.0, 1.0);
      t1 = std::clamp(t1, 0.0, 1.0);
      lo = std::max(lo, std::min(a.x + t0 * ab.x, a.x + t1 * ab.x) - reach);
      hi = std::min(hi, std::max(a.x + t0 * ab.x, a.x + t1 * ab.x) + reach);
    }
    int x0 = std::max(0, int(std::floor(lo)));
    int x1 = std::min(res - 1, int(std::ceil(hi)));
    for (int x = x0; x <= x1; ++x) {
      double d = distance_to_segment({x + 0.5, sy}, a, b);
      double cov = std::clamp(kWallHalfWidth + 0.5 - d, 0.0, 1.0);
      if (cov > 0.0) blend(img.at(x, y), kWallIntensity, cov);
    }
  }
}

void draw_ball(Image& img, Vec2 c, double r) {
  int res = img.width;
  double reach = r + 0.5;
  int y0 = std::max(0, int(std::floor(c.y - reach)));
  int y1 = std::min(res - 1, int(std::ceil(c.y + reach)));
  int x0 = std::max(0, int(std::floor(c.x - reach)));
  int x1 = std::min(res - 1, int(std::ceil(c.x + reach)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double d = norm(Vec2{x + 0.5, y + 0.5} - c);
      double cov = std::clamp(r + 0.5 - d, 0.0, 1.0);
      if (cov > 0.0) blend(img.at(x, y), kBallIntensity, cov);
    }
  }
}

}  // namespace

Image render_frame(const WorldState& state, const Viewport& viewport, int resolution) {
  if (resolution < 8) throw ValidationError("render resolution must be >= 8");
  if (viewport.size <= 0.0) throw ValidationError("viewport size must be positive");
  double s = resolution / viewport.size;
  double half = resolution * 0.5;
  auto to_dev = [&](Vec2 p) { return (p - viewport.center) * s + Vec2{half, half}; };

  Image img(resolution, resolution, 1, kExteriorIntensity);

  std::vector<Vec2> poly;
  poly.reserve(state.table.vertices.size());
  for (Vec2 v : state.table.vertices) poly.push_back(to_dev(v));
  if (!poly.empty()) {
    fill_interior(img, poly);
    size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) draw_wall(img, poly[i], poly[(i + 1) % n]);
  }
  for (const Ball& b : state.balls) draw_ball(img, to_dev(b.center), b.radius * s);
  return img;
}

Image glimpse(const WorldState& state, int ball_id, int glimpse_size, int resolution) {
  const Ball* ball = state.find_ball(ball_id);
  if (!ball) throw UnknownBall(ball_id);
  Image native = render_frame(state, {ball->center, double(glimpse_size)}, glimpse_size);
  if (resolution == glimpse_size) return native;
  return downsample_area(native, resolution, resolution);
}

Image render_frame_centric(const WorldState& state, int resolution) {
  Vec2 lo = state.table.bbox_min;
  Vec2 hi = state.table.bbox_max;
  Vec2 center = (lo + hi) * 0.5;
  double size = std::max(hi.x - lo.x, hi.y - lo.y);
  return render_frame(state, {center, size}, resolution);
}

GlimpseStack glimpse_stack(const Trajectory& traj, int ball_id, int t,
                           int glimpse_size, int resolution) {
  if (t < 0 || t >= int(traj.frames.size())) throw OutOfRange("frame index");
  GlimpseStack stack;
  stack.ball_id = ball_id;
  for (int i = 0; i < 4; ++i) {
    int frame = std::max(0, t - 3 + i);
    stack.frames[size_t(i)] =
        glimpse(traj.state_at(frame), ball_id, glimpse_size, resolution);
  }
  stack.force = {0.0, 0.0};
  if (t == 0) {
    auto it = traj.forces_at_t0.find(ball_id);
    if (it != traj.forces_at_t0.end()) stack.force = it->second;
  }
  return stack;
}

}  // namespace cueplan
