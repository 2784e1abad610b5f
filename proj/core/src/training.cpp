#include "cueplan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "cueplan/errors.hpp"
#include "cueplan/rng.hpp"

namespace cueplan {
namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

/// Pre-rendered float32 network inputs for every (sequence, frame[, ball]).
/// Rendering dominates training cost otherwise; the cache trades ~4 bytes
/// per pixel for doing it once.
class RenderCache {
 public:
  int res = 0;
  std::vector<size_t> seq_base;  // per sequence: first entry index
  std::vector<int> per_frame;    // entries per frame (n_balls for OC, 1 for FC)
  std::vector<float> data;

  const float* entry(int seq, int t, int item) const {
    return data.data() + (seq_base[seq] + size_t(t) * per_frame[seq] + item) *
                             size_t(res) * res;
  }

  /// Copies frames t-3..t (clamped to 0) of one item into a [4,res,res] stack.
  Tensor stack(int seq, int t, int item) const {
    Tensor x;
    x.shape = {4, res, res};
    x.data.resize(size_t(4) * res * res);
    const size_t plane = size_t(res) * res;
    for (int j = 0; j < 4; ++j) {
      const int tj = std::max(0, t - 3 + j);
      const float* src = entry(seq, tj, item);
      double* dst = x.data.data() + j * plane;
      for (size_t p = 0; p < plane; ++p) dst[p] = src[p];
    }
    return x;
  }
};

RenderCache build_oc_cache(const Dataset& ds, const OcArch& arch) {
  RenderCache cache;
  cache.res = arch.input_res;
  const size_t plane = size_t(arch.input_res) * arch.input_res;
  size_t total = 0;
  for (const Sequence& s : ds.sequences) {
    cache.seq_base.push_back(total);
    cache.per_frame.push_back(s.trajectory.ball_count());
    total += size_t(s.trajectory.frames.size()) * s.trajectory.ball_count();
  }
  cache.data.resize(total * plane);
  for (size_t si = 0; si < ds.sequences.size(); ++si) {
    const Trajectory& traj = ds.sequences[si].trajectory;
    for (size_t t = 0; t < traj.frames.size(); ++t) {
      WorldState state = traj.state_at(int(t));
      for (int b = 0; b < traj.ball_count(); ++b) {
        Image img = glimpse(state, traj.frames[t][b].id, arch.glimpse_size,
                            arch.input_res);
        float* dst = cache.data.data() +
                     (cache.seq_base[si] + t * traj.ball_count() + b) * plane;
        for (size_t p = 0; p < plane; ++p) dst[p] = float(img.pixels[p]);
      }
    }
  }
  return cache;
}

RenderCache build_fc_cache(const Dataset& ds, const FcArch& arch) {
  RenderCache cache;
  cache.res = arch.input_res;
  const size_t plane = size_t(arch.input_res) * arch.input_res;
  size_t total = 0;
  for (const Sequence& s : ds.sequences) {
    cache.seq_base.push_back(total);
    cache.per_frame.push_back(1);
    total += s.trajectory.frames.size();
  }
  cache.data.resize(total * plane);
  for (size_t si = 0; si < ds.sequences.size(); ++si) {
    const Trajectory& traj = ds.sequences[si].trajectory;
    for (size_t t = 0; t < traj.frames.size(); ++t) {
      Image img = render_frame_centric(traj.state_at(int(t)), arch.input_res);
      float* dst = cache.data.data() + (cache.seq_base[si] + t) * plane;
      for (size_t p = 0; p < plane; ++p) dst[p] = float(img.pixels[p]);
    }
  }
  return cache;
}

RecurrentCtxVars ctx_to_vars(Tape& tape, const RecurrentCtx& ctx) {
  return {tape.constant(ctx.h1), tape.constant(ctx.c1), tape.constant(ctx.h2),
          tape.constant(ctx.c2)};
}

long long batch_ball_count(const Dataset& ds, const std::vector<WindowRef>& windows) {
  long long n = 0;
  for (const WindowRef& w : windows)
    n += ds.sequences[w.seq].trajectory.ball_count();
  return n;
}

void log_epoch(std::ostream* log, int epoch, double loss, double secs) {
  if (!log) return;
  if (epoch == 0) *log << "epoch,mean_loss,wall_seconds\n";
  *log << epoch << ',' << loss << ',' << secs << '\n';
  log->flush();
}

template <typename BatchFn>
TrainStats run_epochs(const Dataset& ds, const TrainConfig& cfg, std::ostream* log,
                      BatchFn&& batch_fn) {
  const int batches = int((ds.sequences.size() + cfg.batch_sequences - 1) /
                          size_t(cfg.batch_sequences));
  TrainStats stats;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fresh window draws every epoch (the pool of admissible windows is far
    // larger than one epoch covers); the per-epoch seed split keeps runs
    // bit-reproducible.
    Rng rng(split_seed(cfg.seed, uint64_t(epoch)));
    const auto t0 = clock_type::now();
    double epoch_sum = 0.0;
    for (int b = 0; b < batches; ++b) {
      const std::vector<WindowRef> windows = make_minibatch(ds, cfg, rng);
      const double loss = batch_fn(windows);
      if (!std::isfinite(loss))
        throw DivergenceDetected("batch loss is not finite (epoch " +
                                 std::to_string(epoch) + ")");
      epoch_sum += loss;
    }
    stats.epoch_loss.push_back(epoch_sum / batches);
    stats.epoch_seconds.push_back(seconds_since(t0));
    log_epoch(log, epoch, stats.epoch_loss.back(), stats.epoch_seconds.back());
  }
  return stats;
}

}  // namespace

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.h < 1) throw ValidationError("train: h must be >= 1");
  if (cfg.batch_sequences < 1)
    throw ValidationError("train: batch_sequences must be >= 1");
  if (cfg.subseq_len < 1) throw ValidationError("train: subseq_len must be >= 1");
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr))
    throw ValidationError("train: lr must be non-negative");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw ValidationError("train: momentum must be in [0, 1)");
  if (cfg.epochs < 0) throw ValidationError("train: epochs must be >= 0");
}

std::vector<WindowRef> make_minibatch(const Dataset& ds, const TrainConfig& cfg,
                                      Rng& rng) {
  if (ds.sequences.empty()) throw ValidationError("make_minibatch: empty dataset");
  std::vector<WindowRef> out;
  out.reserve(cfg.batch_sequences);
  for (int i = 0; i < cfg.batch_sequences; ++i) {
    const int s = int(rng.uniform_index(ds.sequences.size()));
    const int T = ds.sequences[s].trajectory.steps();
    if (T < cfg.subseq_len)
      throw SequenceTooShort("sequence " + std::to_string(s) + " has " +
                             std::to_string(T) + " steps, window needs " +
                             std::to_string(cfg.subseq_len));
    out.push_back({s, rng.uniform_int(0, T - cfg.subseq_len)});
  }
  return out;
}

StepTarget window_targets(const Trajectory& traj, int ball_index, int t, int h) {
  StepTarget st;
  st.target.shape = {h, 2};
  st.target.data.assign(size_t(2) * h, 0.0);
  st.mask.assign(h, 0.0);
  const int T = traj.steps();
  for (int k = 1; k <= h; ++k) {
    if (t + k > T) break;
    const Vec2 u = traj.step_velocity(ball_index, t + k);
    st.target.data[size_t(2) * (k - 1)] = u.x;
    st.target.data[size_t(2) * (k - 1) + 1] = u.y;
    st.mask[k - 1] = 1.0;
  }
  return st;
}

TrainStats train_oc(OcModel& model, const Dataset& ds, const TrainConfig& cfg,
                    std::ostream* log) {
  validate_train_config(cfg);
  if (cfg.h != model.arch.h)
    throw ValidationError("train: cfg.h does not match the model horizon");
  const RenderCache cache = build_oc_cache(ds, model.arch);
  const std::vector<double> weights = horizon_weights(cfg.h);

  return run_epochs(ds, cfg, log, [&](const std::vector<WindowRef>& windows) {
    const double denom = double(batch_ball_count(ds, windows)) * cfg.subseq_len;
    double batch_loss = 0.0;
    for (const WindowRef& w : windows) {
      const Sequence& seq = ds.sequences[w.seq];
      const Trajectory& traj = seq.trajectory;
      for (int b = 0; b < traj.ball_count(); ++b) {
        const int id = traj.frames[0][b].id;
        Tape tape;
        RecurrentCtxVars ctx = ctx_to_vars(tape, model.zero_ctx());
        Var total;
        for (int off = 0; off < cfg.subseq_len; ++off) {
          const int t = w.start + off;
          Var input = tape.constant(cache.stack(w.seq, t, b));
          Tensor force;
          force.shape = {2};
          force.data = {0.0, 0.0};
          if (t == 0) {
            auto it = seq.forces_at_t0.find(id);
            if (it != seq.forces_at_t0.end()) force.data = {it->second.x, it->second.y};
          }
          OcModel::StepOut out = model.forward(tape, input, tape.constant(force), ctx);
          ctx = out.ctx;
          const StepTarget st = window_targets(traj, b, t, cfg.h);
          Var l = tape.weighted_sqdiff(out.pred, st.target, weights, st.mask);
          total = (off == 0) ? l : tape.add(total, l);
        }
        tape.backward(total, 1.0 / denom);
        batch_loss += tape.value(total).data[0] / denom;
      }
    }
    sgd_step(model.params, cfg.lr, cfg.momentum);
    return batch_loss;
  });
}

TrainStats train_fc(FcModel& model, const Dataset& ds, const TrainConfig& cfg,
                    std::ostream* log) {
  validate_train_config(cfg);
  if (cfg.h != model.arch.h)
    throw ValidationError("train: cfg.h does not match the model horizon");
  for (const Sequence& s : ds.sequences)
    if (s.trajectory.ball_count() > model.arch.l_max)
      throw TooManyBalls(s.trajectory.ball_count(), model.arch.l_max);
  const RenderCache cache = build_fc_cache(ds, model.arch);
  const int l_max = model.arch.l_max;
  const int h = cfg.h;

  // Per-slot copies of the horizon weights; empty slots are masked instead.
  const std::vector<double> base = horizon_weights(h);
  std::vector<double> weights(size_t(l_max) * h);
  for (int s = 0; s < l_max; ++s)
    std::copy(base.begin(), base.end(), weights.begin() + size_t(s) * h);

  return run_epochs(ds, cfg, log, [&](const std::vector<WindowRef>& windows) {
    const double denom = double(batch_ball_count(ds, windows)) * cfg.subseq_len;
    double batch_loss = 0.0;
    for (const WindowRef& w : windows) {
      const Sequence& seq = ds.sequences[w.seq];
      const Trajectory& traj = seq.trajectory;
      const int n = traj.ball_count();
      // Slot s holds the ball with the s-th smallest id (the predictor's
      // convention); worldgen ids are already 0..n-1 in index order.
      std::vector<int> slot_index(n);
      for (int s = 0; s < n; ++s) slot_index[s] = s;
      std::sort(slot_index.begin(), slot_index.end(), [&](int a, int b) {
        return traj.frames[0][a].id < traj.frames[0][b].id;
      });
      Tape tape;
      RecurrentCtxVars ctx = ctx_to_vars(tape, model.zero_ctx());
      Var total;
      for (int off = 0; off < cfg.subseq_len; ++off) {
        const int t = w.start + off;
        Var input = tape.constant(cache.stack(w.seq, t, 0));
        Tensor forces;
        forces.shape = {l_max, 2};
        forces.data.assign(size_t(2) * l_max, 0.0);
        if (t == 0) {
          for (int s = 0; s < n; ++s) {
            auto it = seq.forces_at_t0.find(traj.frames[0][slot_index[s]].id);
            if (it == seq.forces_at_t0.end()) continue;
            forces.data[size_t(2) * s] = it->second.x;
            forces.data[size_t(2) * s + 1] = it->second.y;
          }
        }
        Tensor target;
        target.shape = {l_max * h, 2};
        target.data.assign(size_t(2) * l_max * h, 0.0);
        std::vector<double> mask(size_t(l_max) * h, 0.0);
        for (int s = 0; s < n; ++s) {
          const StepTarget st = window_targets(traj, slot_index[s], t, h);
          std::copy(st.target.data.begin(), st.target.data.end(),
                    target.data.begin() + size_t(2) * s * h);
          std::copy(st.mask.begin(), st.mask.end(), mask.begin() + size_t(s) * h);
        }
        FcModel::StepOut out =
            model.forward(tape, input, tape.constant(forces), ctx);
        ctx = out.ctx;
        Var l = tape.weighted_sqdiff(out.pred, target, weights, mask);
        total = (off == 0) ? l : tape.add(total, l);
      }
      tape.backward(total, 1.0 / denom);
      batch_loss += tape.value(total).data[0] / denom;
    }
    sgd_step(model.params, cfg.lr, cfg.momentum);
    return batch_loss;
  });
}

std::vector<TrainStats> train_oc_curriculum(OcModel& model,
                                            const std::vector<const Dataset*>& stages,
                                            const TrainConfig& cfg,
                                            std::ostream* log) {
  if (stages.empty()) throw ValidationError("curriculum: no stages");
  std::vector<TrainStats> all;
  for (size_t i = 0; i < stages.size(); ++i) {
    if (log) *log << "# stage " << (i + 1) << " of " << stages.size() << '\n';
    all.push_back(train_oc(model, *stages[i], cfg, log));
  }
  return all;
}

}  // namespace cueplan
