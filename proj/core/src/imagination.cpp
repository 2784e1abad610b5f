#include "cueplan/imagination.hpp"

#include <cstdio>

#include "cueplan/errors.hpp"

namespace cueplan {

Imagined imagine(const WorldState& initial, const ForceMap& forces,
                 Predictor& predictor, int T, const PhysicsParams& params,
                 const ImagineConfig& cfg) {
  if (T < 1) throw ValidationError("imagine requires T >= 1");
  predictor.reset();

  WorldState cur = initial;
  for (const auto& [id, f] : forces) cur = apply_force(cur, id, f, params);
  cur.t = 0;

  Imagined out;
  out.trajectory.table = cur.table;
  out.trajectory.forces_at_t0 = forces;
  out.trajectory.frames.reserve(size_t(T) + 1);
  out.trajectory.frames.push_back(cur.balls);
  if (cfg.render_resolution > 0) {
    out.frames.push_back(render_frame_centric(cur, cfg.render_resolution));
  }

  std::map<int, Vec2> displacement;
  for (const Ball& b : cur.balls) displacement[b.id] = b.velocity;

  for (int t = 0; t < T; ++t) {
    ObservedFrame frame;
    frame.state = cur;
    frame.displacement = displacement;
    if (t == 0) frame.forces = forces;
    frame.t = t;
    auto preds = predictor.step(frame);

    for (Ball& b : cur.balls) {
      auto it = preds.find(b.id);
      if (it == preds.end() || it->second.velocities.empty()) {
        throw ValidationError("predictor returned no velocity for ball " +
                              std::to_string(b.id));
      }
      Vec2 u = it->second.velocities.front();
      b.center += u;
      b.velocity = u;
      displacement[b.id] = u;
    }
    cur.t = t + 1;
    out.trajectory.frames.push_back(cur.balls);
    if (cfg.render_resolution > 0) {
      out.frames.push_back(render_frame_centric(cur, cfg.render_resolution));
    }
  }
  return out;
}

int dump_frames(const Imagined& imagined, const std::filesystem::path& dir) {
  if (imagined.frames.empty()) return 0;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());
  for (size_t i = 0; i < imagined.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06zu.ppm", i);
    save_ppm(imagined.frames[i], dir / name);
  }
  return int(imagined.frames.size());
}

}  // namespace cueplan
