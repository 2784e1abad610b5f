#include "cueplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cueplan/errors.hpp"
#include "cueplan/rng.hpp"

namespace cueplan {
namespace {

int index_of_ball(const std::vector<Ball>& balls, int id) {
  for (size_t i = 0; i < balls.size(); ++i)
    if (balls[i].id == id) return int(i);
  throw UnknownBall(id);
}

int goal_cue(const Goal& goal) {
  return std::visit([](const auto& g) { return g.cue_id; }, goal);
}

constexpr double kTau = 6.283185307179586476925286766559;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

double wrap01(double v) {
  double w = v - std::floor(v);
  return w < 1.0 ? w : 0.0;
}

Vec2 decode_force(const std::vector<double>& x, const CmaConfig& cfg) {
  const double lo = cfg.force_mag_range[0];
  const double hi = cfg.force_mag_range[1];
  if (cfg.parameterization == CmaConfig::Param::polar) {
    const double angle = kTau * wrap01(x[0]);
    const double mag = lo + clamp01(x[1]) * (hi - lo);
    return {mag * std::cos(angle), mag * std::sin(angle)};
  }
  Vec2 f{x[0] * hi, x[1] * hi};
  double mag = norm(f);
  if (mag < 1e-12) return {lo, 0.0};
  if (mag > hi) f = f * (hi / mag);
  if (mag < lo) f = f * (lo / mag);
  return f;
}

void validate_goal(const WorldState& state, const Goal& goal) {
  index_of_ball(state.balls, goal_cue(goal));
  if (const auto* hit = std::get_if<HitBall>(&goal)) {
    index_of_ball(state.balls, hit->target_ball_id);
    if (hit->target_ball_id == hit->cue_id)
      throw InvalidGoal("cue and target ball must differ");
  } else {
    const auto& push = std::get<PushToLocation>(goal);
    if (!std::isfinite(push.target.x) || !std::isfinite(push.target.y))
      throw InvalidGoal("target location must be finite");
    if (!point_in_polygon(state.table.vertices, push.target))
      throw InvalidGoal("target location lies outside the table");
  }
}

PlanResult execute(const WorldState& state, const Goal& goal, Vec2 force,
                   double imagined_cost, int rollout_T,
                   const PhysicsParams& params,
                   const std::vector<int>& thresholds) {
  std::map<int, Vec2> forces{{goal_cue(goal), force}};
  Trajectory traj = simulate(state, forces, rollout_T, params);
  PlanResult res;
  res.force = force;
  res.imagined_cost = imagined_cost;
  res.executed_min_distance = goal_cost(traj, goal);
  for (int p : thresholds) res.hit[p] = res.executed_min_distance < double(p);
  return res;
}

}  // namespace

double goal_cost(const Trajectory& traj, const Goal& goal) {
  if (traj.frames.empty()) throw ValidationError("goal_cost: empty trajectory");
  if (const auto* push = std::get_if<PushToLocation>(&goal)) {
    const int cue = index_of_ball(traj.frames[0], push->cue_id);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& frame : traj.frames)
      best = std::min(best, norm(frame[cue].center - push->target));
    return best;
  }
  const auto& hit = std::get<HitBall>(goal);
  const int cue = index_of_ball(traj.frames[0], hit.cue_id);
  const int tgt = index_of_ball(traj.frames[0], hit.target_ball_id);
  for (const auto& ev : traj.events) {
    if (ev.kind != CollisionKind::ball_ball) continue;
    if ((ev.a == cue && ev.b == tgt) || (ev.a == tgt && ev.b == cue)) return 0.0;
  }
  const double touch = traj.frames[0][cue].radius + traj.frames[0][tgt].radius;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& frame : traj.frames) {
    const double gap = norm(frame[cue].center - frame[tgt].center) - touch;
    best = std::min(best, std::max(0.0, gap));
  }
  return best;
}

PlanResult plan(const WorldState& state, const Goal& goal, Predictor& predictor,
                const CmaConfig& cfg, int rollout_T, const PhysicsParams& params,
                const std::vector<int>& thresholds) {
  validate_goal(state, goal);
  if (rollout_T < 1) throw ValidationError("plan: rollout_T must be >= 1");
  const int cue = goal_cue(goal);

  auto objective = [&](const std::vector<double>& x) {
    std::map<int, Vec2> forces{{cue, decode_force(x, cfg)}};
    Imagined rollout = imagine(state, forces, predictor, rollout_T, params);
    return goal_cost(rollout.trajectory, goal);
  };
  std::vector<double> x0{0.5, 0.5};
  CmaResult cma = cma_es(objective, x0, cfg.sigma0, cfg.lambda, cfg.max_evals,
                         cfg.seed);
  return execute(state, goal, decode_force(cma.best_x, cfg), cma.best_value,
                 rollout_T, params, thresholds);
}

PlanResult random_plan(const WorldState& state, const Goal& goal, uint64_t seed,
                       const std::array<double, 2>& force_mag_range,
                       int rollout_T, const PhysicsParams& params,
                       const std::vector<int>& thresholds) {
  validate_goal(state, goal);
  Rng rng(seed);
  Vec2 force = sample_force(rng, force_mag_range);
  return execute(state, goal, force, std::numeric_limits<double>::quiet_NaN(),
                 rollout_T, params, thresholds);
}

std::map<int, double> hit_accuracy(const std::vector<PlanResult>& results,
                                   const std::vector<int>& thresholds) {
  if (results.empty()) throw EmptyResults("hit_accuracy");
  std::map<int, double> acc;
  for (int p : thresholds) {
    long long hits = 0;
    for (const auto& r : results)
      if (r.executed_min_distance < double(p)) ++hits;
    acc[p] = double(hits) / double(results.size());
  }
  return acc;
}

std::vector<TrialRecord> run_push_trials(const TrialConfig& cfg, Predictor* predictor) {
  if (cfg.trials < 1) throw ValidationError("run_push_trials: trials must be >= 1");
  std::vector<TrialRecord> records;
  records.reserve(cfg.trials);
  for (int i = 0; i < cfg.trials; ++i) {
    const uint64_t trial_seed = split_seed(cfg.seed, uint64_t(i));
    auto [state, world_forces] = sample_world(cfg.spec, split_seed(trial_seed, 0));
    (void)world_forces;  // trials start at rest; the planner picks the force
    const Ball& cue = state.balls[0];
    const Table& table = state.table;

    // Rejection-sample a reachable target: inside the table with one ball
    // radius of margin, far enough from the cue to be a real task.
    Rng target_rng(split_seed(trial_seed, 1));
    Vec2 target;
    bool placed = false;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      target = {target_rng.uniform(table.bbox_min.x, table.bbox_max.x),
                target_rng.uniform(table.bbox_min.y, table.bbox_max.y)};
      if (!point_in_polygon(table.vertices, target)) continue;
      if (distance_to_polygon_edges(table.vertices, target) < cue.radius) continue;
      if (norm(target - cue.center) < cfg.min_target_separation) continue;
      placed = true;
      break;
    }
    if (!placed) throw PlacementFailure("trial target placement failed");

    Goal goal = PushToLocation{cue.id, target};
    TrialRecord rec;
    rec.index = i;
    rec.world_seed = split_seed(trial_seed, 0);
    rec.target = target;
    if (predictor) {
      CmaConfig cma = cfg.cma;
      cma.seed = split_seed(trial_seed, 2);
      cma.force_mag_range = cfg.spec.force_mag_range;
      rec.result = plan(state, goal, *predictor, cma, cfg.rollout_T, cfg.physics,
                        cfg.thresholds);
    } else {
      rec.result = random_plan(state, goal, split_seed(trial_seed, 3),
                               cfg.spec.force_mag_range, cfg.rollout_T,
                               cfg.physics, cfg.thresholds);
    }
    records.push_back(rec);
  }
  return records;
}

}  // namespace cueplan
