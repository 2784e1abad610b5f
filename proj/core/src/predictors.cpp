#include "cueplan/predictors.hpp"

#include <algorithm>
#include <json.hpp>

#include "cueplan/errors.hpp"

namespace cueplan {

Prediction cv_predict(Vec2 prev_velocity, int h) {
  if (h < 1) throw ValidationError("horizon must be >= 1");
  Prediction p;
  p.velocities.assign(size_t(h), prev_velocity);
  return p;
}

std::map<int, Prediction> CvPredictor::step(const ObservedFrame& frame) {
  std::map<int, Prediction> out;
  for (const Ball& b : frame.state.balls) {
    auto it = frame.displacement.find(b.id);
    if (it == frame.displacement.end()) {
      throw ValidationError("missing displacement for ball " + std::to_string(b.id));
    }
    out[b.id] = cv_predict(it->second, h_);
  }
  return out;
}

Prediction oracle_predict(const WorldState& state, int ball_id, int h,
                          const PhysicsParams& params) {
  if (!state.find_ball(ball_id)) throw UnknownBall(ball_id);
  Prediction p;
  WorldState prev = state;
  for (int k = 0; k < h; ++k) {
    WorldState next = step(prev, params).first;
    for (size_t i = 0; i < next.balls.size(); ++i) {
      if (next.balls[i].id == ball_id) {
        p.velocities.push_back(next.balls[i].center - prev.balls[i].center);
      }
    }
    prev = std::move(next);
  }
  return p;
}

std::map<int, Prediction> OraclePredictor::step(const ObservedFrame& frame) {
  if (!state_) {
    state_ = frame.state;
    state_->t = frame.t;
  }
  std::map<int, Prediction> out;
  for (const Ball& b : state_->balls) out[b.id] = Prediction{};
  WorldState prev = *state_;
  for (int k = 0; k < h_; ++k) {
    WorldState next = cueplan::step(prev, params_).first;
    for (size_t i = 0; i < next.balls.size(); ++i) {
      out[next.balls[i].id].velocities.push_back(next.balls[i].center -
                                                 prev.balls[i].center);
    }
    if (k == 0) state_ = next;  // internal state advances exactly one step
    prev = std::move(next);
  }
  return out;
}

// --- network construction ------------------------------------------------------

namespace {

// Spatial size after each applied 3x3 stride-2 conv. A conv is applied while
// the current dim admits a 3x3 window, up to the configured channel count.
std::vector<int> chain_dims(int input_res, size_t max_convs) {
  std::vector<int> dims;
  int d = input_res;
  while (dims.size() < max_convs && d >= 3) {
    d = (d - 3) / 2 + 1;
    dims.push_back(d);
  }
  if (dims.empty()) throw ValidationError("input resolution too small for conv trunk");
  return dims;
}

void build_trunk_params(ParamSet& p, const std::vector<int>& channels,
                        const std::vector<int>& dims, int flat, int aux_inputs,
                        int encoder, int hidden, int out_dim, Rng& rng) {
  int in_ch = 4;
  for (size_t i = 0; i < dims.size(); ++i) {
    int out_ch = channels[i];
    Tensor& w = p.add("conv" + std::to_string(i + 1) + ".w", {out_ch, in_ch, 3, 3});
    glorot_init(w, in_ch * 9, out_ch * 9, rng);
    p.add("conv" + std::to_string(i + 1) + ".b", {out_ch});
    in_ch = out_ch;
  }
  int enc_in = flat + aux_inputs;
  glorot_init(p.add("enc.w", {encoder, enc_in}), enc_in, encoder, rng);
  p.add("enc.b", {encoder});

  auto lstm = [&](const std::string& name, int in) {
    glorot_init(p.add(name + ".w", {4 * hidden, in + hidden}), in + hidden, 4 * hidden,
                rng);
    Tensor& b = p.add(name + ".b", {4 * hidden});
    for (int i = hidden; i < 2 * hidden; ++i) b.data[size_t(i)] = 1.0;  // forget gate
  };
  lstm("lstm1", encoder);
  lstm("lstm2", encoder + hidden);

  glorot_init(p.add("dec.w", {out_dim, 2 * hidden}), 2 * hidden, out_dim, rng);
  p.add("dec.b", {out_dim});
}

struct WiredOut {
  Var pred;
  RecurrentCtxVars ctx;
};

WiredOut wired_forward(Tape& tape, ParamSet& p, Var input, Var force_raw,
                       double force_scale, const RecurrentCtxVars& ctx,
                       size_t n_convs) {
  Var x = input;
  for (size_t i = 0; i < n_convs; ++i) {
    std::string base = "conv" + std::to_string(i + 1);
    x = tape.relu(tape.conv2d(x, tape.param(p, base + ".w"), tape.param(p, base + ".b"),
                              2));
  }
  Var force = tape.scale(force_raw, force_scale);
  Var enc_in = tape.concat({x, force});
  Var enc = tape.relu(
      tape.linear(enc_in, tape.param(p, "enc.w"), tape.param(p, "enc.b")));
  auto [h1, c1] = tape.lstm_cell(enc, ctx.h1, ctx.c1, tape.param(p, "lstm1.w"),
                                 tape.param(p, "lstm1.b"));
  Var l2_in = tape.concat({enc, h1});
  auto [h2, c2] = tape.lstm_cell(l2_in, ctx.h2, ctx.c2, tape.param(p, "lstm2.w"),
                                 tape.param(p, "lstm2.b"));
  Var dec_in = tape.concat({h1, h2});
  Var pred = tape.linear(dec_in, tape.param(p, "dec.w"), tape.param(p, "dec.b"));
  return {pred, {h1, c1, h2, c2}};
}

RecurrentCtx zero_ctx_for(int hidden) {
  RecurrentCtx ctx;
  ctx.h1 = Tensor({hidden});
  ctx.c1 = Tensor({hidden});
  ctx.h2 = Tensor({hidden});
  ctx.c2 = Tensor({hidden});
  return ctx;
}

// A restored checkpoint must carry exactly the parameters the architecture
// descriptor implies, each with the right shape.
void verify_layout(const ParamSet& got, const ParamSet& want) {
  for (const auto& [name, e] : want.entries) {
    auto it = got.entries.find(name);
    if (it == got.entries.end())
      throw ShapeMismatch("checkpoint is missing parameter " + name);
    if (it->second.value.shape != e.value.shape)
      throw ShapeMismatch("checkpoint parameter " + name + " has shape " +
                          shape_str(it->second.value.shape) + ", expected " +
                          shape_str(e.value.shape));
  }
  for (const auto& [name, _] : got.entries) {
    if (!want.entries.count(name))
      throw ShapeMismatch("checkpoint has unexpected parameter " + name);
  }
}

template <typename Model>
std::pair<Tensor, RecurrentCtx> infer_impl(Model& m, const Tensor& input,
                                           const Tensor& force,
                                           const RecurrentCtx& ctx) {
  Tape tape;
  RecurrentCtxVars cv{tape.constant(ctx.h1), tape.constant(ctx.c1),
                      tape.constant(ctx.h2), tape.constant(ctx.c2)};
  auto out = m.forward(tape, tape.constant(input), tape.constant(force), cv);
  RecurrentCtx next{tape.value(out.ctx.h1), tape.value(out.ctx.c1),
                    tape.value(out.ctx.h2), tape.value(out.ctx.c2)};
  return {tape.value(out.pred), std::move(next)};
}

}  // namespace

std::vector<int> OcModel::conv_dims() const {
  return chain_dims(arch.input_res, arch.conv_channels.size());
}

int OcModel::flat_size() const {
  auto dims = conv_dims();
  return arch.conv_channels[dims.size() - 1] * dims.back() * dims.back();
}

RecurrentCtx OcModel::zero_ctx() const { return zero_ctx_for(arch.hidden); }

OcModel OcModel::create(const OcArch& arch, uint64_t seed) {
  OcModel m;
  m.arch = arch;
  Rng rng(seed);
  auto dims = m.conv_dims();
  build_trunk_params(m.params, arch.conv_channels, dims, m.flat_size(), 2,
                     arch.encoder, arch.hidden, 2 * arch.h, rng);
  nlohmann::json meta = {{"kind", "oc"},
                         {"input_res", arch.input_res},
                         {"glimpse_size", arch.glimpse_size},
                         {"h", arch.h},
                         {"hidden", arch.hidden},
                         {"encoder", arch.encoder},
                         {"conv_channels", arch.conv_channels},
                         {"force_scale", arch.force_scale}};
  m.params.meta = meta.dump();
  return m;
}

OcModel OcModel::from_params(ParamSet params) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(params.meta);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointMissing("checkpoint has no readable architecture descriptor");
  }
  if (meta.value("kind", "") != "oc") {
    throw CheckpointMissing("checkpoint is not an object-centric model");
  }
  OcModel m;
  m.arch.input_res = meta.at("input_res").get<int>();
  m.arch.glimpse_size = meta.at("glimpse_size").get<int>();
  m.arch.h = meta.at("h").get<int>();
  m.arch.hidden = meta.at("hidden").get<int>();
  m.arch.encoder = meta.at("encoder").get<int>();
  m.arch.conv_channels = meta.at("conv_channels").get<std::vector<int>>();
  m.arch.force_scale = meta.at("force_scale").get<double>();
  m.params = std::move(params);
  verify_layout(m.params, OcModel::create(m.arch, 0).params);
  return m;
}

void OcModel::save(const std::filesystem::path& file) const {
  save_params(params, file);
}

OcModel OcModel::load(const std::filesystem::path& file) {
  return from_params(load_params(file));
}

OcModel::StepOut OcModel::forward(Tape& tape, Var input, Var force,
                                  const RecurrentCtxVars& ctx) {
  const auto& shape = tape.value(input).shape;
  std::vector<int> want{4, arch.input_res, arch.input_res};
  if (shape != want) {
    throw ShapeMismatch("oc input must be " + shape_str(want) + ", got " +
                        shape_str(shape));
  }
  auto out = wired_forward(tape, params, input, force, arch.force_scale, ctx,
                           conv_dims().size());
  return {out.pred, out.ctx};
}

std::pair<Tensor, RecurrentCtx> OcModel::infer(const Tensor& input, Vec2 force,
                                               const RecurrentCtx& ctx) {
  Tensor f({2}, {force.x, force.y});
  return infer_impl(*this, input, f, ctx);
}

std::vector<int> FcModel::conv_dims() const {
  return chain_dims(arch.input_res, arch.conv_channels.size());
}

int FcModel::flat_size() const {
  auto dims = conv_dims();
  return arch.conv_channels[dims.size() - 1] * dims.back() * dims.back();
}

RecurrentCtx FcModel::zero_ctx() const { return zero_ctx_for(arch.hidden); }

FcModel FcModel::create(const FcArch& arch, uint64_t seed) {
  FcModel m;
  m.arch = arch;
  Rng rng(seed);
  auto dims = m.conv_dims();
  build_trunk_params(m.params, arch.conv_channels, dims, m.flat_size(),
                     2 * arch.l_max, arch.encoder, arch.hidden,
                     2 * arch.h * arch.l_max, rng);
  nlohmann::json meta = {{"kind", "fc"},
                         {"input_res", arch.input_res},
                         {"h", arch.h},
                         {"hidden", arch.hidden},
                         {"encoder", arch.encoder},
                         {"l_max", arch.l_max},
                         {"conv_channels", arch.conv_channels},
                         {"force_scale", arch.force_scale}};
  m.params.meta = meta.dump();
  return m;
}

FcModel FcModel::from_params(ParamSet params) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(params.meta);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointMissing("checkpoint has no readable architecture descriptor");
  }
  if (meta.value("kind", "") != "fc") {
    throw CheckpointMissing("checkpoint is not a frame-centric model");
  }
  FcModel m;
  m.arch.input_res = meta.at("input_res").get<int>();
  m.arch.h = meta.at("h").get<int>();
  m.arch.hidden = meta.at("hidden").get<int>();
  m.arch.encoder = meta.at("encoder").get<int>();
  m.arch.l_max = meta.at("l_max").get<int>();
  m.arch.conv_channels = meta.at("conv_channels").get<std::vector<int>>();
  m.arch.force_scale = meta.at("force_scale").get<double>();
  m.params = std::move(params);
  verify_layout(m.params, FcModel::create(m.arch, 0).params);
  return m;
}

void FcModel::save(const std::filesystem::path& file) const {
  save_params(params, file);
}

FcModel FcModel::load(const std::filesystem::path& file) {
  return from_params(load_params(file));
}

FcModel::StepOut FcModel::forward(Tape& tape, Var input, Var forces,
                                  const RecurrentCtxVars& ctx) {
  const auto& shape = tape.value(input).shape;
  std::vector<int> want{4, arch.input_res, arch.input_res};
  if (shape != want) {
    throw ShapeMismatch("fc input must be " + shape_str(want) + ", got " +
                        shape_str(shape));
  }
  if (tape.value(forces).numel() != 2 * arch.l_max) {
    throw ShapeMismatch("fc force vector must have length 2*l_max");
  }
  auto out = wired_forward(tape, params, input, forces, arch.force_scale, ctx,
                           conv_dims().size());
  return {out.pred, out.ctx};
}

std::pair<Tensor, RecurrentCtx> FcModel::infer(const Tensor& input,
                                               const Tensor& forces,
                                               const RecurrentCtx& ctx) {
  return infer_impl(*this, input, forces, ctx);
}

// --- learned predictors ---------------------------------------------------------

namespace {

Tensor stack_frames(const std::deque<Image>& history, int res) {
  Tensor in({4, res, res});
  size_t px = size_t(res) * size_t(res);
  for (size_t i = 0; i < 4; ++i) {
    const Image& img = history[i];
    std::copy(img.pixels.begin(), img.pixels.end(), in.data.begin() + long(i * px));
  }
  return in;
}

void push_history(std::deque<Image>& history, Image img) {
  if (history.empty()) {
    history.assign(4, img);  // first-frame padding
  } else {
    history.push_back(std::move(img));
    while (history.size() > 4) history.pop_front();
  }
}

Prediction unpack_prediction(const Tensor& flat, int offset, int h) {
  Prediction p;
  p.velocities.reserve(size_t(h));
  for (int k = 0; k < h; ++k) {
    p.velocities.push_back(
        {flat.data[size_t(offset + 2 * k)], flat.data[size_t(offset + 2 * k + 1)]});
  }
  return p;
}

}  // namespace

std::map<int, Prediction> OcPredictor::step(const ObservedFrame& frame) {
  std::map<int, Prediction> out;
  for (const Ball& b : frame.state.balls) {
    Track& tr = tracks_[b.id];
    if (tr.history.empty()) tr.ctx = model_.zero_ctx();
    push_history(tr.history,
                 glimpse(frame.state, b.id, model_.arch.glimpse_size,
                         model_.arch.input_res));
    Tensor input = stack_frames(tr.history, model_.arch.input_res);
    Vec2 force{0.0, 0.0};
    if (auto it = frame.forces.find(b.id); it != frame.forces.end()) force = it->second;
    auto [pred, ctx] = model_.infer(input, force, tr.ctx);
    tr.ctx = std::move(ctx);
    out[b.id] = unpack_prediction(pred, 0, model_.arch.h);
  }
  return out;
}

std::map<int, Prediction> FcPredictor::step(const ObservedFrame& frame) {
  int l_max = model_.arch.l_max;
  if (int(frame.state.balls.size()) > l_max) {
    throw TooManyBalls(int(frame.state.balls.size()), l_max);
  }
  std::vector<int> ids;
  for (const Ball& b : frame.state.balls) ids.push_back(b.id);
  std::sort(ids.begin(), ids.end());

  if (!ctx_) ctx_ = model_.zero_ctx();
  push_history(history_, render_frame_centric(frame.state, model_.arch.input_res));
  Tensor input = stack_frames(history_, model_.arch.input_res);
  Tensor forces({2 * l_max});
  for (size_t s = 0; s < ids.size(); ++s) {
    if (auto it = frame.forces.find(ids[s]); it != frame.forces.end()) {
      forces.data[2 * s] = it->second.x;
      forces.data[2 * s + 1] = it->second.y;
    }
  }
  auto [pred, ctx] = model_.infer(input, forces, *ctx_);
  ctx_ = std::move(ctx);

  std::map<int, Prediction> out;
  for (size_t s = 0; s < ids.size(); ++s) {
    out[ids[s]] = unpack_prediction(pred, int(s) * 2 * model_.arch.h, model_.arch.h);
  }
  return out;
}

}  // namespace cueplan
