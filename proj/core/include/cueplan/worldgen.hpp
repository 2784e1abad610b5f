#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "cueplan/trajectory.hpp"

namespace cueplan {

/// Axis-aligned box with both side lengths drawn from length_range.
struct Rectangular {
  std::array<double, 2> length_range{300.0, 550.0};
};

/// Named convex/concave templates, uniformly scaled by a factor drawn from
/// scale_range. Known names: rectangle, right-trapezoid, hexagon, l-shape.
struct PolygonFamily {
  std::vector<std::string> templates{"rectangle", "right-trapezoid", "hexagon",
                                     "l-shape"};
  std::array<double, 2> scale_range{300.0, 550.0};
};

using Geometry = std::variant<Rectangular, PolygonFamily>;

struct WorldSpec {
  std::string name = "train";
  int n_balls = 1;
  Geometry geometry = Rectangular{};
  std::array<double, 2> force_mag_range{30000.0, 80000.0};  // Newtons
  std::array<int, 2> seq_len_range{20, 200};                // steps
  double ball_radius = 25.0;
  int glimpse_size = 64;
};

void validate_spec(const WorldSpec& spec);

class Rng;  // rng.hpp

/// Uniform direction, uniform magnitude in mag_range. Shared by sequence
/// generation and the random-force planning baseline.
Vec2 sample_force(Rng& rng, const std::array<double, 2>& mag_range);

/// Vertices of a named template at the given scale, origin at (0,0).
std::vector<Vec2> polygon_template(const std::string& name, double scale);

/// One generated interaction: forces applied at t=0, then free evolution.
struct Sequence {
  Trajectory trajectory;
  ForceMap forces_at_t0;
  WorldSpec spec_used;
  uint64_t seed = 0;
};

struct Dataset {
  std::vector<Sequence> sequences;
  WorldSpec spec;
  uint64_t master_seed = 0;
};

/// Draws a table, non-overlapping ball placements (rejection sampling,
/// centers >= radius inside) and one force per ball with uniform direction
/// and magnitude in force_mag_range. Deterministic in seed.
/// Throws PlacementFailure after 10,000 rejected placements.
std::pair<WorldState, ForceMap> sample_world(const WorldSpec& spec, uint64_t seed);

/// sample_world + sequence length draw + simulation.
Sequence generate_sequence(const WorldSpec& spec, uint64_t seed,
                           const PhysicsParams& params = {});

/// n independent sequences with per-sequence seeds split from master_seed,
/// so the result does not depend on generation order or thread count.
Dataset generate_dataset(const WorldSpec& spec, int n_sequences, uint64_t master_seed,
                         const PhysicsParams& params = {}, int threads = 1);

/// Named evaluation specs: the training distribution, larger walls
/// ([800, 1200] px), 3/4/6-ball transfer worlds and non-rectangular tables.
std::vector<WorldSpec> test_spec_variants();

/// Directory layout: manifest.json + seq_000000.blrd, seq_000001.blrd, ...
/// The manifest carries the spec, seeds, per-sequence table geometry and
/// forces (the .blrd files store only frames and events).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace cueplan
