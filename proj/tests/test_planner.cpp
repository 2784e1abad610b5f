#include "doctest.h"

#include <cmath>
#include <map>
#include <vector>

#include "cueplan/errors.hpp"
#include "cueplan/planner.hpp"

using namespace cueplan;

namespace {

Trajectory manual_trajectory(const std::vector<std::vector<Vec2>>& centers,
                             double radius = 25.0) {
  Trajectory traj;
  traj.table = make_rect_table(1000.0, 1000.0);
  for (const auto& frame : centers) {
    std::vector<Ball> balls;
    for (size_t i = 0; i < frame.size(); ++i)
      balls.push_back({int(i), frame[i], {0.0, 0.0}, radius, 1.0});
    traj.frames.push_back(std::move(balls));
  }
  return traj;
}

/// Predicts no motion at all; the planner's objective becomes flat.
struct ZeroPredictor : Predictor {
  explicit ZeroPredictor(int h) : h_(h) {}
  void reset() override {}
  std::map<int, Prediction> step(const ObservedFrame& frame) override {
    std::map<int, Prediction> out;
    for (const Ball& b : frame.state.balls)
      out[b.id] = Prediction{std::vector<Vec2>(size_t(h_), Vec2{0.0, 0.0})};
    return out;
  }
  int horizon() const override { return h_; }
  std::string name() const override { return "zero"; }
  int h_;
};

}  // namespace

TEST_CASE("goal_cost for push goals is the closest approach") {
  Trajectory through =
      manual_trajectory({{{100, 100}}, {{150, 150}}, {{200, 200}}});
  CHECK(goal_cost(through, PushToLocation{0, {150, 150}}) ==
        doctest::Approx(0.0));
  CHECK(goal_cost(through, PushToLocation{0, {200, 100}}) ==
        doctest::Approx(std::sqrt(50.0 * 50.0 + 50.0 * 50.0)));

  Trajectory still = manual_trajectory({{{100, 100}}, {{100, 100}}});
  CHECK(goal_cost(still, PushToLocation{0, {200, 100}}) ==
        doctest::Approx(100.0));

  CHECK_THROWS_AS(goal_cost(still, PushToLocation{7, {200, 100}}), UnknownBall);
}

TEST_CASE("goal_cost for hit goals uses the surface gap and events") {
  // Two stationary balls 120 px apart: gap 120 - 25 - 25.
  Trajectory still = manual_trajectory({{{100, 100}, {220, 100}}});
  CHECK(goal_cost(still, HitBall{0, 1}) == doctest::Approx(70.0));

  // A recorded contact event drives the cost to zero even when no sampled
  // frame shows the overlap.
  Trajectory contact = manual_trajectory({{{100, 100}, {220, 100}}});
  contact.events.push_back({0, 0.5, CollisionKind::ball_ball, 0, 1});
  CHECK(goal_cost(contact, HitBall{0, 1}) == doctest::Approx(0.0));

  // Wall events and other pairs do not count.
  Trajectory wall = manual_trajectory({{{100, 100}, {220, 100}}});
  wall.events.push_back({0, 0.5, CollisionKind::ball_wall, 0, 2});
  CHECK(goal_cost(wall, HitBall{0, 1}) == doctest::Approx(70.0));

  // Overlapping frames floor at zero.
  Trajectory overlap = manual_trajectory({{{100, 100}, {140, 100}}});
  CHECK(goal_cost(overlap, HitBall{0, 1}) == doctest::Approx(0.0));
}

TEST_CASE("hit_accuracy counts executed distances under thresholds") {
  auto mk = [](double d) {
    PlanResult r;
    r.executed_min_distance = d;
    return r;
  };
  std::vector<PlanResult> results{mk(5.0), mk(30.0), mk(60.0)};
  auto acc = hit_accuracy(results, {10, 25, 50});
  CHECK(acc.at(10) == doctest::Approx(1.0 / 3.0));
  CHECK(acc.at(25) == doctest::Approx(1.0 / 3.0));
  CHECK(acc.at(50) == doctest::Approx(2.0 / 3.0));

  std::vector<PlanResult> zeros{mk(0.0), mk(0.0)};
  auto perfect = hit_accuracy(zeros, {10, 25, 50});
  CHECK(perfect.at(10) == doctest::Approx(1.0));
  CHECK(perfect.at(50) == doctest::Approx(1.0));

  CHECK_THROWS_AS(hit_accuracy({}, {10}), EmptyResults);
}

TEST_CASE("plan validates goals before searching") {
  WorldState s;
  s.table = make_rect_table(400.0, 300.0);
  s.balls.push_back({0, {100.0, 100.0}, {0.0, 0.0}, 25.0, 1.0});
  PhysicsParams params;
  CmaConfig cma;
  cma.max_evals = 12;
  OraclePredictor oracle(1, params);

  CHECK_THROWS_AS(
      plan(s, HitBall{0, 0}, oracle, cma, 10, params), InvalidGoal);
  CHECK_THROWS_AS(
      plan(s, HitBall{0, 3}, oracle, cma, 10, params), UnknownBall);
  CHECK_THROWS_AS(
      plan(s, PushToLocation{0, {5000.0, 100.0}}, oracle, cma, 10, params),
      InvalidGoal);
  CHECK_THROWS_AS(
      plan(s, PushToLocation{0, {std::nan(""), 100.0}}, oracle, cma, 10,
           params),
      InvalidGoal);
}

TEST_CASE("oracle planning lands a straight push within ten pixels") {
  WorldState s;
  s.table = make_rect_table(400.0, 300.0);
  s.balls.push_back({0, {100.0, 100.0}, {0.0, 0.0}, 25.0, 1.0});
  PhysicsParams params;
  CmaConfig cma;
  cma.seed = 17;
  OraclePredictor oracle(1, params);

  Goal goal = PushToLocation{0, {300.0, 150.0}};
  PlanResult res = plan(s, goal, oracle, cma, 100, params);

  CHECK(res.executed_min_distance < 10.0);
  // With the oracle, the imagined rollout IS the execution.
  CHECK(res.imagined_cost == doctest::Approx(res.executed_min_distance));
  CHECK(res.hit.at(10));
  CHECK(res.hit.at(25));
  CHECK(res.hit.at(50));
  double mag = norm(res.force);
  CHECK(mag >= cma.force_mag_range[0] - 1e-9);
  CHECK(mag <= cma.force_mag_range[1] + 1e-9);

  // Determinism in (state, seed).
  PlanResult res2 = plan(s, goal, oracle, cma, 100, params);
  CHECK(res2.force == res.force);
  CHECK(res2.executed_min_distance == res.executed_min_distance);
}

TEST_CASE("cartesian parameterization also plans successfully") {
  WorldState s;
  s.table = make_rect_table(400.0, 300.0);
  s.balls.push_back({0, {100.0, 100.0}, {0.0, 0.0}, 25.0, 1.0});
  PhysicsParams params;
  CmaConfig cma;
  cma.seed = 23;
  cma.parameterization = CmaConfig::Param::cartesian;
  OraclePredictor oracle(1, params);
  PlanResult res =
      plan(s, PushToLocation{0, {300.0, 150.0}}, oracle, cma, 100, params);
  CHECK(res.executed_min_distance < 25.0);
  double mag = norm(res.force);
  CHECK(mag >= cma.force_mag_range[0] - 1e-9);
  CHECK(mag <= cma.force_mag_range[1] + 1e-9);
}

TEST_CASE("a motionless predictor leaves the objective flat") {
  WorldState s;
  s.table = make_rect_table(400.0, 300.0);
  s.balls.push_back({0, {100.0, 100.0}, {0.0, 0.0}, 25.0, 1.0});
  PhysicsParams params;
  CmaConfig cma;
  cma.seed = 29;
  cma.max_evals = 30;
  ZeroPredictor zero(1);

  Goal goal = PushToLocation{0, {300.0, 150.0}};
  PlanResult res = plan(s, goal, zero, cma, 100, params);
  const double initial = norm(Vec2{300.0, 150.0} - Vec2{100.0, 100.0});
  // Imagined cost: the ball never moves in imagination.
  CHECK(res.imagined_cost == doctest::Approx(initial));
}

TEST_CASE("random_plan draws in-range forces deterministically") {
  WorldState s;
  s.table = make_rect_table(400.0, 300.0);
  s.balls.push_back({0, {100.0, 100.0}, {0.0, 0.0}, 25.0, 1.0});
  PhysicsParams params;
  Goal goal = PushToLocation{0, {300.0, 150.0}};

  PlanResult a = random_plan(s, goal, 5, {30000.0, 80000.0}, 100, params);
  PlanResult b = random_plan(s, goal, 5, {30000.0, 80000.0}, 100, params);
  PlanResult c = random_plan(s, goal, 6, {30000.0, 80000.0}, 100, params);
  CHECK(a.force == b.force);
  CHECK(a.executed_min_distance == b.executed_min_distance);
  CHECK(!(a.force == c.force));
  double mag = norm(a.force);
  CHECK(mag >= 30000.0);
  CHECK(mag <= 80000.0);
  CHECK(a.executed_min_distance >= 0.0);
}

TEST_CASE("push trials: oracle dominates the random baseline") {
  TrialConfig cfg;
  cfg.trials = 20;
  cfg.seed = 202;
  cfg.cma.max_evals = 90;  // keep the test quick; plenty for the oracle

  PhysicsParams params;
  OraclePredictor oracle(1, params);
  auto oracle_trials = run_push_trials(cfg, &oracle);
  auto random_trials = run_push_trials(cfg, nullptr);
  REQUIRE(oracle_trials.size() == 20);
  REQUIRE(random_trials.size() == 20);

  std::vector<PlanResult> o, r;
  for (const auto& t : oracle_trials) o.push_back(t.result);
  for (const auto& t : random_trials) r.push_back(t.result);
  auto acc_o = hit_accuracy(o, cfg.thresholds);
  auto acc_r = hit_accuracy(r, cfg.thresholds);
  for (int p : cfg.thresholds) {
    CHECK(acc_o.at(p) >= acc_r.at(p));
  }
  // The oracle planner is near-perfect on in-distribution pushes.
  CHECK(acc_o.at(50) == doctest::Approx(1.0));
  CHECK(acc_o.at(10) >= 0.8);

  // Matched worlds: the trial protocol derives both runs from cfg.seed.
  for (size_t i = 0; i < oracle_trials.size(); ++i) {
    CHECK(oracle_trials[i].world_seed == random_trials[i].world_seed);
    CHECK(oracle_trials[i].target == random_trials[i].target);
  }

  // Determinism of the whole benchmark.
  auto again = run_push_trials(cfg, nullptr);
  for (size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].result.force == random_trials[i].result.force);
    CHECK(again[i].result.executed_min_distance ==
          random_trials[i].result.executed_min_distance);
  }
}

TEST_CASE("trial targets respect the separation rule") {
  TrialConfig cfg;
  cfg.trials = 12;
  cfg.seed = 77;
  cfg.min_target_separation = 50.0;
  auto trials = run_push_trials(cfg, nullptr);
  for (const auto& t : trials) {
    // Target at least one radius inside the table and 50 px from the cue.
    // The cue is ball 0 of the world regenerated from the recorded seed.
    WorldSpec spec = cfg.spec;
    auto [state, forces] = sample_world(spec, t.world_seed);
    CHECK(point_in_polygon(state.table.vertices, t.target));
    CHECK(distance_to_polygon_edges(state.table.vertices, t.target) >=
          state.balls[0].radius - 1e-9);
    CHECK(norm(t.target - state.balls[0].center) >=
          cfg.min_target_separation - 1e-9);
  }
}
