#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <unistd.h>

#include "cueplan/errors.hpp"
#include "cueplan/imagination.hpp"
#include "cueplan/worldgen.hpp"

using namespace cueplan;
namespace fs = std::filesystem;

TEST_CASE("oracle imagination reproduces the simulator exactly") {
  WorldSpec spec;
  spec.n_balls = 2;
  auto [state, forces] = sample_world(spec, 97);
  PhysicsParams params;
  const int T = 60;

  Trajectory truth = simulate(state, forces, T, params);
  OraclePredictor oracle(1, params);
  Imagined im = imagine(state, forces, oracle, T, params);

  REQUIRE(im.trajectory.frames.size() == size_t(T) + 1);
  CHECK(im.trajectory.events.empty());
  CHECK(im.trajectory.table.vertices == state.table.vertices);
  for (int t = 0; t <= T; ++t) {
    for (int b = 0; b < 2; ++b) {
      // Bit-exact closure: the oracle runs the same simulator in lockstep.
      CHECK(im.trajectory.frames[size_t(t)][size_t(b)].center ==
            truth.frames[size_t(t)][size_t(b)].center);
    }
  }
}

TEST_CASE("constant-velocity imagination flies straight") {
  WorldState s;
  s.table = make_rect_table(2000.0, 2000.0);
  s.balls.push_back({0, {200.0, 300.0}, {0.0, 0.0}, 25.0, 1.0});
  PhysicsParams params;
  ForceMap forces{{0, {24000.0, 16000.0}}};  // u0 = (3, 2) px/step

  CvPredictor cv(1);
  Imagined im = imagine(s, forces, cv, 50, params);
  REQUIRE(im.trajectory.frames.size() == 51);
  for (int t = 0; t <= 50; ++t) {
    const Ball& b = im.trajectory.frames[size_t(t)][0];
    CHECK(b.center.x == doctest::Approx(200.0 + 3.0 * t).epsilon(1e-12));
    CHECK(b.center.y == doctest::Approx(300.0 + 2.0 * t).epsilon(1e-12));
  }
  // Frame 0 is post-force: the recorded velocity is already u0.
  CHECK(im.trajectory.frames[0][0].velocity == Vec2{3.0, 2.0});
}

TEST_CASE("imagined balls may leave the table without correction") {
  WorldState s;
  s.table = make_rect_table(300.0, 300.0);
  s.balls.push_back({0, {150.0, 150.0}, {0.0, 0.0}, 25.0, 1.0});
  PhysicsParams params;
  CvPredictor cv(1);
  // 20 px/step for 30 steps runs 600 px: far beyond the walls.
  Imagined im = imagine(s, {{0, {160000.0, 0.0}}}, cv, 30, params);
  CHECK(im.trajectory.frames.back()[0].center.x > 300.0);
}

TEST_CASE("imagination renders frames only when asked") {
  WorldSpec spec;
  auto [state, forces] = sample_world(spec, 5);
  PhysicsParams params;
  OraclePredictor oracle(1, params);

  Imagined plain = imagine(state, forces, oracle, 10, params);
  CHECK(plain.frames.empty());

  ImagineConfig cfg;
  cfg.render_resolution = 48;
  Imagined rendered = imagine(state, forces, oracle, 10, params, cfg);
  REQUIRE(rendered.frames.size() == 11);
  CHECK(rendered.frames[0].width == 48);
  CHECK(rendered.frames[0].height == 48);
}

TEST_CASE("dump_frames writes one PPM per frame") {
  WorldSpec spec;
  auto [state, forces] = sample_world(spec, 8);
  PhysicsParams params;
  OraclePredictor oracle(1, params);
  ImagineConfig cfg;
  cfg.render_resolution = 32;
  Imagined im = imagine(state, forces, oracle, 20, params, cfg);

  fs::path dir = fs::temp_directory_path() /
                 ("cueplan_dump_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  int n = dump_frames(im, dir);
  CHECK(n == 21);
  CHECK(fs::exists(dir / "frame_000000.ppm"));
  CHECK(fs::exists(dir / "frame_000020.ppm"));
  CHECK_FALSE(fs::exists(dir / "frame_000021.ppm"));
  fs::remove_all(dir);

  Imagined empty = imagine(state, forces, oracle, 5, params);
  CHECK(dump_frames(empty, dir) == 0);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("imagination propagates validation errors") {
  WorldSpec spec;
  auto [state, forces] = sample_world(spec, 5);
  PhysicsParams params;
  OraclePredictor oracle(1, params);
  CHECK_THROWS_AS(imagine(state, forces, oracle, 0, params), ValidationError);
}

TEST_CASE("imagination is deterministic") {
  WorldSpec spec;
  spec.n_balls = 3;
  auto [state, forces] = sample_world(spec, 55);
  PhysicsParams params;
  OraclePredictor o1(1, params), o2(1, params);
  Imagined a = imagine(state, forces, o1, 40, params);
  Imagined b = imagine(state, forces, o2, 40, params);
  REQUIRE(a.trajectory.frames.size() == b.trajectory.frames.size());
  for (size_t t = 0; t < a.trajectory.frames.size(); ++t)
    for (size_t i = 0; i < a.trajectory.frames[t].size(); ++i)
      CHECK(a.trajectory.frames[t][i].center == b.trajectory.frames[t][i].center);
}
