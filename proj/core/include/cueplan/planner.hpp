#pragma once

#include <variant>

#include "cueplan/cma.hpp"
#include "cueplan/imagination.hpp"
#include "cueplan/worldgen.hpp"

namespace cueplan {

/// Push ball cue_id so its center passes by `target`.
struct PushToLocation {
  int cue_id = 0;
  Vec2 target;
};

/// Push ball cue_id into contact with ball target_ball_id.
struct HitBall {
  int cue_id = 0;
  int target_ball_id = 1;
};

using Goal = std::variant<PushToLocation, HitBall>;

/// Smallest goal distance achieved along a trajectory (ground truth or
/// imagined). PushToLocation: min_t |cue - target|. HitBall: min_t of the
/// surface gap, floored at 0; any recorded ball-ball event between the two
/// balls counts as contact (gap 0) even if no sampled frame shows it.
double goal_cost(const Trajectory& traj, const Goal& goal);

struct PlanResult {
  Vec2 force;                         // Newtons, applied to the cue at t=0
  double imagined_cost = 0.0;         // best objective over imagined rollouts
  double executed_min_distance = 0.0; // goal_cost of the ground-truth execution
  std::map<int, bool> hit;            // threshold px -> executed < threshold
};

/// CMA-ES over the force applied to the goal's cue ball. Objective:
/// goal_cost of an imagined rollout of `rollout_T` steps. The chosen force
/// is then executed in the real simulator. Search runs in a normalized
/// space; polar: angle = 2*pi*wrap01(x0), magnitude interpolates
/// force_mag_range by clamp01(x1); cartesian: x*hi with the magnitude
/// clamped into range.
PlanResult plan(const WorldState& state, const Goal& goal, Predictor& predictor,
                const CmaConfig& cfg, int rollout_T = 100,
                const PhysicsParams& params = {},
                const std::vector<int>& thresholds = {10, 25, 50});

/// Baseline: one force drawn from the worldgen force sampler, executed.
PlanResult random_plan(const WorldState& state, const Goal& goal, uint64_t seed,
                       const std::array<double, 2>& force_mag_range,
                       int rollout_T = 100, const PhysicsParams& params = {},
                       const std::vector<int>& thresholds = {10, 25, 50});

/// Fraction of results with executed_min_distance < p for each threshold p.
std::map<int, double> hit_accuracy(const std::vector<PlanResult>& results,
                                   const std::vector<int>& thresholds);

/// Reproducible push-to-location benchmark. Per trial i (seeds split from
/// cfg.seed): sample a world from cfg.spec, pick a target uniformly inside
/// the table at least one ball radius from the walls and at least
/// min_target_separation from the cue, then plan (or draw a random force
/// when predictor is null) and execute.
struct TrialConfig {
  int trials = 100;
  WorldSpec spec;  // typically the 1-ball training distribution
  uint64_t seed = 0;
  int rollout_T = 100;
  double min_target_separation = 50.0;
  CmaConfig cma;
  PhysicsParams physics;
  std::vector<int> thresholds{10, 25, 50};
};

struct TrialRecord {
  int index = 0;
  uint64_t world_seed = 0;
  Vec2 target;
  PlanResult result;
};

std::vector<TrialRecord> run_push_trials(const TrialConfig& cfg, Predictor* predictor);

}  // namespace cueplan
