#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "cueplan/cma.hpp"
#include "cueplan/physics.hpp"
#include "cueplan/training.hpp"
#include "cueplan/worldgen.hpp"

namespace cueplan {

/// Single source of run defaults for the CLI. Every field can be set from a
/// JSON config file; command-line flags override file values, and the seed
/// additionally falls back to the CUEPLAN_SEED environment variable
/// (precedence: flag > env > file). A seed must come from one of the three.
struct RunConfig {
  std::optional<uint64_t> seed;
  int threads = 1;

  WorldSpec world;
  TrainConfig train;
  CmaConfig cma;
  PhysicsParams physics;

  OcArch oc;
  FcArch fc;

  int eval_h = 20;          // horizon for error tables
  int imagine_T = 100;      // imagined rollout length
  int rollout_T = 100;      // planning rollout + execution length
  int plan_trials = 100;    // planning benchmark trials
  int render_resolution = 256;  // imagination frame dumps
};

RunConfig default_run_config();

/// Reads a JSON config; unknown keys are rejected, absent keys keep defaults.
RunConfig load_run_config(const std::filesystem::path& file);

/// Canonical JSON (sorted keys, 2-space indent, trailing newline); writing
/// the parse of a config back out is byte-identical.
std::string run_config_to_json(const RunConfig& cfg);

/// Resolves the seed from flag/env/config precedence. `flag_seed` is the
/// command-line value when given; env is CUEPLAN_SEED when set and numeric.
/// Throws ValidationError when no source provides one.
uint64_t resolve_seed(const RunConfig& cfg, std::optional<uint64_t> flag_seed);

}  // namespace cueplan
