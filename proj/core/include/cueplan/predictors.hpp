#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "cueplan/render.hpp"
#include "cueplan/tape.hpp"

namespace cueplan {

/// Per-step velocities (= per-step displacements) for k = 1..h, world px/step.
struct Prediction {
  std::vector<Vec2> velocities;
};

/// Everything a predictor may see at one time step. `displacement` holds the
/// per-ball step velocity u_t = x_t - x_{t-1} ending at this frame (at t=0,
/// the initial post-force velocity). Forces are feature inputs, nonzero only
/// at t=0. Predictors that consume pixels render internally from `state`.
struct ObservedFrame {
  WorldState state;
  std::map<int, Vec2> displacement;
  ForceMap forces;
  int t = 0;
};

/// Stateful sequential predictor: reset at sequence start, then one step per
/// frame in order. Returns an h-step prediction per ball id.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual void reset() = 0;
  virtual std::map<int, Prediction> step(const ObservedFrame& frame) = 0;
  virtual int horizon() const = 0;
  virtual std::string name() const = 0;
};

/// h copies of the previous step's velocity.
Prediction cv_predict(Vec2 prev_velocity, int h);

/// Ground-truth rollout from the given state; reads per-step displacements.
Prediction oracle_predict(const WorldState& state, int ball_id, int h,
                          const PhysicsParams& params);

class CvPredictor : public Predictor {
 public:
  explicit CvPredictor(int h) : h_(h) {}
  void reset() override {}
  std::map<int, Prediction> step(const ObservedFrame& frame) override;
  int horizon() const override { return h_; }
  std::string name() const override { return "cv"; }

 private:
  int h_;
};

/// Initializes an internal simulator from the first observed frame, then
/// evolves it one ground-truth step per call, ignoring later observations.
/// Predictions and the frame-by-frame simulation agree bit-exactly, which is
/// what closes the imagination loop with zero error.
class OraclePredictor : public Predictor {
 public:
  OraclePredictor(int h, const PhysicsParams& params) : h_(h), params_(params) {}
  void reset() override { state_.reset(); }
  std::map<int, Prediction> step(const ObservedFrame& frame) override;
  int horizon() const override { return h_; }
  std::string name() const override { return "oracle"; }

 private:
  int h_;
  PhysicsParams params_;
  std::optional<WorldState> state_;
};

// --- learned models ----------------------------------------------------------

/// Object-centric trunk dimensions. The conv chain applies 3x3 stride-2
/// layers (channels 4 -> conv_channels[i], ReLU after each) while the
/// spatial dim is >= 3, so the same code scales from test-size inputs (8x8)
/// to the default 32x32.
struct OcArch {
  int input_res = 32;     // network input resolution (square)
  int glimpse_size = 512; // world px covered by a glimpse before downsampling
  int h = 20;             // prediction horizon
  int hidden = 64;        // LSTM hidden size, both layers
  int encoder = 64;       // encoder output width
  std::vector<int> conv_channels{8, 16, 16, 16};
  double force_scale = 1.0 / 80000.0;  // Newtons -> roughly [0,1]
};

/// Frame-centric variant: same trunk, whole-scene input, fixed ball slots.
struct FcArch {
  int input_res = 32;
  int h = 20;
  int hidden = 64;
  int encoder = 64;
  int l_max = 6;  // output slots, ordered by ball id
  std::vector<int> conv_channels{8, 16, 16, 16};
  double force_scale = 1.0 / 80000.0;
};

/// Recurrent state of the two LSTM layers as plain tensors.
struct RecurrentCtx {
  Tensor h1, c1, h2, c2;
};

/// Tape handles for the same state, used when unrolling through time.
struct RecurrentCtxVars {
  Var h1, c1, h2, c2;
};

/// Shared wiring of both networks: conv trunk -> (features ++ force) ->
/// encoder -> LSTM1; (encoder ++ h1) -> LSTM2; (h1 ++ h2) -> decoder.
/// The encoder feeds both LSTM layers and both hidden states feed the
/// decoder (skip connections).
class OcModel {
 public:
  OcArch arch;
  ParamSet params;

  /// Fresh Glorot-initialized parameters; LSTM forget-gate biases start at 1.
  static OcModel create(const OcArch& arch, uint64_t seed);
  /// Rebuilds the model from a checkpoint's ParamSet (arch from its meta).
  static OcModel from_params(ParamSet params);
  void save(const std::filesystem::path& file) const;
  static OcModel load(const std::filesystem::path& file);

  /// Spatial dims after each applied conv (excluding the input dim).
  std::vector<int> conv_dims() const;
  int flat_size() const;

  RecurrentCtx zero_ctx() const;

  struct StepOut {
    Var pred;  // [2h]
    RecurrentCtxVars ctx;
  };
  /// input: [4, R, R] glimpse stack; force: [2] in Newtons (scaled inside).
  StepOut forward(Tape& tape, Var input, Var force, const RecurrentCtxVars& ctx);

  /// Inference step on plain tensors (builds and discards a private tape).
  std::pair<Tensor, RecurrentCtx> infer(const Tensor& input, Vec2 force,
                                        const RecurrentCtx& ctx);
};

class FcModel {
 public:
  FcArch arch;
  ParamSet params;

  static FcModel create(const FcArch& arch, uint64_t seed);
  static FcModel from_params(ParamSet params);
  void save(const std::filesystem::path& file) const;
  static FcModel load(const std::filesystem::path& file);

  std::vector<int> conv_dims() const;
  int flat_size() const;

  RecurrentCtx zero_ctx() const;

  struct StepOut {
    Var pred;  // [2h * l_max], slot-major
    RecurrentCtxVars ctx;
  };
  /// input: [4, R, R] frame-centric stack; forces: [2*l_max] in Newtons.
  StepOut forward(Tape& tape, Var input, Var forces, const RecurrentCtxVars& ctx);

  std::pair<Tensor, RecurrentCtx> infer(const Tensor& input, const Tensor& forces,
                                        const RecurrentCtx& ctx);
};

/// Runs the OC network per ball with a per-ball glimpse history and
/// recurrent context. Renders its own inputs from the observed state.
class OcPredictor : public Predictor {
 public:
  explicit OcPredictor(OcModel model) : model_(std::move(model)) {}
  void reset() override { tracks_.clear(); }
  std::map<int, Prediction> step(const ObservedFrame& frame) override;
  int horizon() const override { return model_.arch.h; }
  std::string name() const override { return "oc"; }
  OcModel& model() { return model_; }

 private:
  struct Track {
    std::deque<Image> history;  // up to 4, oldest first
    RecurrentCtx ctx;
  };
  OcModel model_;
  std::map<int, Track> tracks_;
};

/// Runs the FC network once per frame on the whole-scene render; output
/// slots are assigned to ball ids in ascending order.
class FcPredictor : public Predictor {
 public:
  explicit FcPredictor(FcModel model) : model_(std::move(model)) {}
  void reset() override {
    history_.clear();
    ctx_.reset();
  }
  std::map<int, Prediction> step(const ObservedFrame& frame) override;
  int horizon() const override { return model_.arch.h; }
  std::string name() const override { return "fc"; }
  FcModel& model() { return model_; }

 private:
  FcModel model_;
  std::deque<Image> history_;
  std::optional<RecurrentCtx> ctx_;
};

}  // namespace cueplan
