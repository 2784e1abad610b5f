#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "cueplan/predictors.hpp"
#include "cueplan/worldgen.hpp"

namespace cueplan {

/// Speeds below this (px/step) count as "at rest" and are excluded from the
/// angular metric (direction is undefined at zero velocity).
inline constexpr double kVelocityEps = 1e-6;

/// Angle between true and predicted step velocity, in degrees [0, 180].
/// nullopt when the true velocity is at rest (excluded sample). A predicted
/// rest against a moving truth scores the maximum error, 180.
std::optional<double> angular_error(Vec2 u_true, Vec2 u_pred);

/// | |u_pred| - |u_true| | / |u_true|; nullopt when the truth is at rest.
std::optional<double> magnitude_rel_error(Vec2 u_true, Vec2 u_pred);

/// mask[t] = true when any collision event lies within `window` steps of
/// frame t. Event at step s covers frames s-window .. s+1+window (the event
/// happens between frames s and s+1).
std::vector<bool> near_collision_mask(const Trajectory& traj, int window = 4);

struct ErrorCell {
  double ang_sum = 0.0;
  double mag_sum = 0.0;
  long long count = 0;      // samples in both metrics
  long long excluded = 0;   // at-rest truths, not in count

  double ang_mean() const { return count ? ang_sum / double(count) : 0.0; }
  double mag_mean() const { return count ? mag_sum / double(count) : 0.0; }
  void add(double ang, double mag) {
    ang_sum += ang;
    mag_sum += mag;
    ++count;
  }
  void merge(const ErrorCell& o) {
    ang_sum += o.ang_sum;
    mag_sum += o.mag_sum;
    count += o.count;
    excluded += o.excluded;
  }
};

/// Per-offset (k = 1..h) errors, stratified by collision proximity: a
/// (t -> t+k) sample is "near" when any predicted frame t+1..t+k carries the
/// near_collision_mask flag, i.e. some collision lies within the window
/// around the span being predicted. Samples a CV extrapolation can get
/// exactly right are all "non_near". overall = near + non_near cell-wise.
struct ErrorTable {
  std::string model;
  int h = 0;
  std::vector<ErrorCell> overall, near, non_near;  // index k-1

  ErrorTable() = default;
  ErrorTable(std::string model_name, int horizon)
      : model(std::move(model_name)), h(horizon), overall(horizon),
        near(horizon), non_near(horizon) {}
  void merge(const ErrorTable& o);
};

using PredictorFactory = std::function<std::unique_ptr<Predictor>()>;

/// Full-sequence stateful evaluation over a dataset: per sequence, a fresh
/// predictor consumes frames 0..T-1 in order; each step's k = 1..h
/// predictions are scored against ground-truth step velocities at t+k
/// (when t+k <= T). Errors pool per (frame, ball) sample.
ErrorTable evaluate(const PredictorFactory& make_predictor, const Dataset& ds,
                    int h, int threads = 1);

/// One row per k: means, counts and exclusions for each stratum.
void write_error_csv(const ErrorTable& table, const std::filesystem::path& file);

/// Aligned text comparison of several models at offsets t+1, t+5, t+20.
std::string format_error_report(const std::vector<ErrorTable>& tables);

}  // namespace cueplan
