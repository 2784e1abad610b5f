#pragma once

#include <iosfwd>

#include "cueplan/predictors.hpp"
#include "cueplan/worldgen.hpp"

namespace cueplan {

class Rng;

struct TrainConfig {
  int h = 20;               // prediction horizon; must match the model
  int batch_sequences = 50; // windows per minibatch
  int subseq_len = 20;      // frames unrolled per window
  double lr = 1e-3;
  double momentum = 0.9;
  int epochs = 30;
  uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& cfg);

/// A training window: subseq_len consecutive frames of one sequence,
/// starting at frame `start` (absolute sequence time).
struct WindowRef {
  int seq = 0;
  int start = 0;
};

/// batch_sequences windows drawn uniformly over (sequence, admissible start).
/// Starts satisfy start + subseq_len <= T so every unrolled frame has at
/// least one in-range target. Throws SequenceTooShort when a drawn sequence
/// cannot fit a window.
std::vector<WindowRef> make_minibatch(const Dataset& ds, const TrainConfig& cfg,
                                      Rng& rng);

/// Per-frame supervision: target[(k-1)*2 + {0,1}] = ground-truth step
/// velocity at t+k (zeros when out of range); mask[k-1] = 1 iff t+k <= T.
struct StepTarget {
  Tensor target;             // [h, 2]
  std::vector<double> mask;  // [h]
};
StepTarget window_targets(const Trajectory& traj, int ball_index, int t, int h);

struct TrainStats {
  std::vector<double> epoch_loss;     // mean batch loss per epoch
  std::vector<double> epoch_seconds;  // wall time per epoch
};

/// SGD with momentum on truncated BPTT windows, freshly drawn every epoch
/// (deterministically in cfg.seed). Each window unrolls subseq_len frames
/// with zeroed recurrent state; glimpse histories still see true pre-window
/// frames. The loss is
///   sum_k w_k * mask * |pred_k - u_{t+k}|^2
/// averaged over (window, frame, ball) with the mask-independent denominator
/// batch_windows * subseq_len * n_balls. Per-epoch CSV rows
/// (epoch,mean_loss,wall_seconds) go to `log` when given; wall times vary
/// run to run, so logs are diagnostics, not reproducible artifacts.
/// Throws DivergenceDetected on a non-finite batch loss.
TrainStats train_oc(OcModel& model, const Dataset& ds, const TrainConfig& cfg,
                    std::ostream* log = nullptr);

/// Same protocol on the frame-centric network: one forward per frame covers
/// all balls; unused output slots are masked out of the loss.
TrainStats train_fc(FcModel& model, const Dataset& ds, const TrainConfig& cfg,
                    std::ostream* log = nullptr);

/// Sequential stages on one model: stage n starts from the parameters stage
/// n-1 ended with. Returns per-stage stats.
std::vector<TrainStats> train_oc_curriculum(OcModel& model,
                                            const std::vector<const Dataset*>& stages,
                                            const TrainConfig& cfg,
                                            std::ostream* log = nullptr);

}  // namespace cueplan
