#pragma once

#include <filesystem>
#include <vector>

#include "cueplan/physics.hpp"

namespace cueplan {

/// Time-indexed ball states over a fixed table, with collision-event
/// annotations. frames[t] holds all balls at step t; frames.size() == T+1.
struct Trajectory {
  Table table;
  std::vector<std::vector<Ball>> frames;
  std::vector<CollisionEvent> events;
  ForceMap forces_at_t0;

  int steps() const { return int(frames.size()) - 1; }
  int ball_count() const { return frames.empty() ? 0 : int(frames.front().size()); }

  WorldState state_at(int t) const;

  /// Per-step displacement of ball `ball_index` ending at frame t (t >= 1):
  /// center[t] - center[t-1]. For t == 0 returns the initial velocity.
  Vec2 step_velocity(int ball_index, int t) const;
};

/// Binary trajectory file, magic "BLRD1", little-endian:
///   magic[5], u32 n_balls, u32 T, f64 radius,
///   frames ((T+1) * n_balls * 4 f64: cx cy vx vy),
///   events until EOF (u32 step, u8 kind, u32 a, u32 b, f64 toi).
/// Table geometry and forces are not part of the format; dataset manifests
/// carry them.
void save_blrd(const Trajectory& traj, const std::filesystem::path& file);

/// Loads frames and events; table and forces are left empty unless provided
/// by the caller afterwards.
Trajectory load_blrd(const std::filesystem::path& file);

}  // namespace cueplan
