#pragma once

#include "cueplan/predictors.hpp"

namespace cueplan {

/// Rollout produced by iterating a predictor: per step the k=1 predicted
/// velocity translates each ball and the updated scene is what the predictor
/// observes next. No physics correction is applied; imagined balls may
/// overlap or leave the table if the predictor errs.
struct Imagined {
  /// frames[t] holds ball centers; the velocity field stores the predicted
  /// step velocity that produced the frame (frame 0: the post-force start).
  /// events stays empty. Serializable like any trajectory.
  Trajectory trajectory;
  /// Whole-table renders of every frame when requested (frames.size() == T+1).
  std::vector<Image> frames;
};

struct ImagineConfig {
  /// When > 0, keep a render_frame_centric image of each step at this
  /// resolution for later dumping.
  int render_resolution = 0;
};

/// Applies the forces to the initial state, then rolls T steps. The
/// predictor is reset first; its recurrent state then persists across the
/// whole rollout. Ground-truth future states are never consulted.
Imagined imagine(const WorldState& initial, const ForceMap& forces,
                 Predictor& predictor, int T, const PhysicsParams& params,
                 const ImagineConfig& cfg = {});

/// Writes frame_000000.ppm ... into dir; returns the file count (0 when the
/// rollout kept no renders).
int dump_frames(const Imagined& imagined, const std::filesystem::path& dir);

}  // namespace cueplan
