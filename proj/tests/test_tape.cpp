#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <unistd.h>
#include <vector>

#include "cueplan/errors.hpp"
#include "cueplan/params.hpp"
#include "cueplan/predictors.hpp"
#include "cueplan/rng.hpp"
#include "cueplan/tape.hpp"

using namespace cueplan;

namespace {

Tensor randn(std::vector<int> shape, Rng& rng, double scale = 0.1) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.normal() * scale;
  return t;
}

/// Adds a Glorot-free N(0, scale^2) parameter; returns its value tensor.
Tensor& add_randn(ParamSet& ps, const std::string& name, std::vector<int> shape,
                  Rng& rng, double scale = 0.1) {
  Tensor& t = ps.add(name, std::move(shape));
  for (double& v : t.data) v = rng.normal() * scale;
  return t;
}

/// Scalar reduction usable on any even-length output: sum of squares.
Var sum_sq(Tape& tape, Var y) {
  long long n = tape.value(y).numel();
  REQUIRE(n % 2 == 0);
  Tensor zeros({int(n)});
  std::vector<double> ones(size_t(n) / 2, 1.0);
  return tape.weighted_sqdiff(y, zeros, ones, ones);
}

using Builder = std::function<Var(Tape&, ParamSet&)>;

double eval_loss(ParamSet& ps, const Builder& build) {
  Tape tape;
  Var loss = build(tape, ps);
  return tape.value(loss)[0];
}

/// Central-difference check of every (or up to max_coords sampled) parameter
/// coordinate against the tape gradient. Returns the worst relative error.
double gradcheck(ParamSet& ps, const Builder& build, Rng& rng,
                 int max_coords = 64) {
  ps.zero_grads();
  Tape tape;
  Var loss = build(tape, ps);
  tape.backward(loss);

  const double eps = 1e-4;
  double worst = 0.0;
  for (auto& [name, entry] : ps.entries) {
    const size_t n = entry.value.data.size();
    std::vector<size_t> coords;
    if (int(n) <= max_coords) {
      for (size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < max_coords; ++i)
        coords.push_back(rng.uniform_index(n));
    }
    for (size_t i : coords) {
      const double orig = entry.value.data[i];
      entry.value.data[i] = orig + eps;
      const double lp = eval_loss(ps, build);
      entry.value.data[i] = orig - eps;
      const double lm = eval_loss(ps, build);
      entry.value.data[i] = orig;
      const double fd = (lp - lm) / (2.0 * eps);
      const double g = entry.grad.data[i];
      const double rel =
          std::abs(fd - g) / std::max(std::abs(fd) + std::abs(g), 1e-6);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("conv2d of ones sums the window") {
  Tape tape;
  Var x = tape.constant(Tensor({1, 3, 3}, std::vector<double>(9, 1.0)));
  Var w = tape.constant(Tensor({1, 1, 3, 3}, std::vector<double>(9, 1.0)));
  Var b = tape.constant(Tensor({1}));
  Var y = tape.conv2d(x, w, b, 1);
  CHECK(tape.value(y).shape == std::vector<int>{1, 1, 1});
  CHECK(tape.value(y)[0] == doctest::Approx(9.0));
}

TEST_CASE("conv2d stride and bias arithmetic") {
  // 1x4x4 ramp, 1x1x2x2 kernel of ones, stride 2, bias 0.5:
  // windows sum 4 adjacent values.
  Tensor x({1, 4, 4});
  for (int i = 0; i < 16; ++i) x.data[size_t(i)] = double(i);
  Tape tape;
  Var xv = tape.constant(x);
  Var w = tape.constant(Tensor({1, 1, 2, 2}, {1, 1, 1, 1}));
  Var b = tape.constant(Tensor({1}, {0.5}));
  Var y = tape.conv2d(xv, w, b, 2);
  CHECK(tape.value(y).shape == std::vector<int>{1, 2, 2});
  CHECK(tape.value(y)[0] == doctest::Approx(0 + 1 + 4 + 5 + 0.5));
  CHECK(tape.value(y)[1] == doctest::Approx(2 + 3 + 6 + 7 + 0.5));
  CHECK(tape.value(y)[2] == doctest::Approx(8 + 9 + 12 + 13 + 0.5));
  CHECK(tape.value(y)[3] == doctest::Approx(10 + 11 + 14 + 15 + 0.5));
}

TEST_CASE("conv2d rejects mismatched shapes") {
  Tape tape;
  Var x = tape.constant(Tensor({2, 4, 4}));
  Var w = tape.constant(Tensor({1, 3, 3, 3}));  // wants 3 in-channels
  Var b = tape.constant(Tensor({1}));
  CHECK_THROWS_AS(tape.conv2d(x, w, b, 1), ShapeMismatch);
}

TEST_CASE("linear with identity weights is the identity") {
  Tape tape;
  Tensor eye({3, 3});
  eye.data = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  Var x = tape.constant(Tensor({3}, {0.3, -1.2, 4.5}));
  Var y = tape.linear(x, tape.constant(eye), tape.constant(Tensor({3})));
  CHECK(tape.value(y).data == std::vector<double>{0.3, -1.2, 4.5});

  Var wbad = tape.constant(Tensor({3, 4}));
  CHECK_THROWS_AS(tape.linear(x, wbad, tape.constant(Tensor({3}))),
                  ShapeMismatch);
}

TEST_CASE("elementwise ops compute forward values") {
  Tape tape;
  Var a = tape.constant(Tensor({4}, {1, -2, 3, 0}));
  Var b = tape.constant(Tensor({4}, {5, 6, -7, 8}));
  CHECK(tape.value(tape.add(a, b)).data == std::vector<double>{6, 4, -4, 8});
  CHECK(tape.value(tape.mul(a, b)).data ==
        std::vector<double>{5, -12, -21, 0});
  CHECK(tape.value(tape.scale(a, -2.0)).data ==
        std::vector<double>{-2, 4, -6, 0});
  CHECK(tape.value(tape.relu(a)).data == std::vector<double>{1, 0, 3, 0});
  CHECK(tape.value(tape.tanh_op(a))[1] == doctest::Approx(std::tanh(-2.0)));
  CHECK(tape.value(tape.sigmoid(a))[2] ==
        doctest::Approx(1.0 / (1.0 + std::exp(-3.0))));

  Var c = tape.constant(Tensor({3}));
  CHECK_THROWS_AS(tape.add(a, c), ShapeMismatch);
  CHECK_THROWS_AS(tape.mul(a, c), ShapeMismatch);
}

TEST_CASE("concat and slice are inverse views") {
  Tape tape;
  Var a = tape.constant(Tensor({2}, {1, 2}));
  Var b = tape.constant(Tensor({3}, {3, 4, 5}));
  Var cat = tape.concat({a, b});
  CHECK(tape.value(cat).data == std::vector<double>{1, 2, 3, 4, 5});
  Var mid = tape.slice(cat, 1, 3);
  CHECK(tape.value(mid).data == std::vector<double>{2, 3, 4});
  CHECK_THROWS_AS(tape.slice(cat, 3, 4), ShapeMismatch);
}

TEST_CASE("horizon weights decay as exp(-k^(1/4))") {
  auto w = horizon_weights(20);
  REQUIRE(w.size() == 20);
  CHECK(std::abs(w[0] - std::exp(-1.0)) < 1e-12);
  CHECK(std::abs(w[15] - std::exp(-2.0)) < 1e-12);  // 16^(1/4) = 2
  for (size_t k = 1; k < w.size(); ++k) CHECK(w[k] < w[k - 1]);
}

TEST_CASE("weighted_sqdiff matches the closed form") {
  Tape tape;
  // One horizon step, prediction off by (3,4): w_1 * 25 = 25/e.
  Var pred = tape.constant(Tensor({2}, {3.0, 4.0}));
  Var loss = tape.weighted_sqdiff(pred, Tensor({2}), horizon_weights(1), {1.0});
  CHECK(tape.value(loss)[0] == doctest::Approx(25.0 * std::exp(-1.0)));

  // Masked step contributes exactly nothing.
  Var pred2 = tape.constant(Tensor({4}, {3.0, 4.0, 1000.0, -1000.0}));
  Var loss2 = tape.weighted_sqdiff(pred2, Tensor({4}), horizon_weights(2),
                                   {1.0, 0.0});
  CHECK(tape.value(loss2)[0] == doctest::Approx(25.0 * std::exp(-1.0)));

  CHECK_THROWS_AS(
      tape.weighted_sqdiff(pred, Tensor({3}), horizon_weights(1), {1.0}),
      ShapeMismatch);
}

TEST_CASE("lstm_cell zero everything stays zero") {
  Tape tape;
  int H = 3, in = 2;
  Var x = tape.constant(Tensor({in}));
  Var h = tape.constant(Tensor({H}));
  Var c = tape.constant(Tensor({H}));
  Var w = tape.constant(Tensor({4 * H, in + H}));
  Var b = tape.constant(Tensor({4 * H}));
  auto [h2, c2] = tape.lstm_cell(x, h, c, w, b);
  for (double v : tape.value(h2).data) CHECK(v == doctest::Approx(0.0));
  for (double v : tape.value(c2).data) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("lstm_cell matches the direct gate formulas") {
  // H = 1, in = 1, gate rows packed [input, forget, candidate, output].
  const double x0 = 0.5, h0 = 0.25, c0 = -0.3;
  const std::vector<double> wrows{0.1, 0.2, 0.3, -0.1, -0.2, 0.4, 0.5, 0.6};
  const std::vector<double> brows{0.01, 1.02, -0.03, 0.04};

  Tape tape;
  auto [hv, cv] = tape.lstm_cell(tape.constant(Tensor({1}, {x0})),
                                 tape.constant(Tensor({1}, {h0})),
                                 tape.constant(Tensor({1}, {c0})),
                                 tape.constant(Tensor({4, 2}, wrows)),
                                 tape.constant(Tensor({4}, brows)));

  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double zi = 0.1 * x0 + 0.2 * h0 + brows[0];
  const double zf = 0.3 * x0 - 0.1 * h0 + brows[1];
  const double zg = -0.2 * x0 + 0.4 * h0 + brows[2];
  const double zo = 0.5 * x0 + 0.6 * h0 + brows[3];
  const double c1 = sig(zf) * c0 + sig(zi) * std::tanh(zg);
  const double h1 = sig(zo) * std::tanh(c1);

  CHECK(tape.value(cv)[0] == doctest::Approx(c1).epsilon(1e-12));
  CHECK(tape.value(hv)[0] == doctest::Approx(h1).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar root") {
  Tape tape;
  Var y = tape.constant(Tensor({3}, {1, 2, 3}));
  CHECK_THROWS_AS(tape.backward(y), NotScalarLoss);
}

TEST_CASE("parameter gradients accumulate across tapes until sgd_step") {
  ParamSet ps;
  ps.add("p", {1})[0] = 3.0;

  for (int rep = 0; rep < 2; ++rep) {
    Tape tape;
    Var p = tape.param(ps, "p");
    Var loss = tape.weighted_sqdiff(tape.concat({p, p}), Tensor({2}), {1.0},
                                    {1.0});  // 2 p^2
    tape.backward(loss);
  }
  // d(2p^2)/dp = 4p = 12 per tape, two tapes accumulate to 24.
  CHECK(ps.grad("p")[0] == doctest::Approx(24.0));

  sgd_step(ps, 0.1, 0.0);
  CHECK(ps.at("p")[0] == doctest::Approx(3.0 - 2.4));
  CHECK(ps.grad("p")[0] == doctest::Approx(0.0));  // consumed
}

TEST_CASE("sgd with momentum follows the two-step closed form") {
  ParamSet ps;
  ps.add("p", {1})[0] = 1.0;
  const double lr = 0.1, mu = 0.9;

  ps.grad("p")[0] = 1.0;
  sgd_step(ps, lr, mu);
  // v1 = 1, p1 = 1 - 0.1.
  CHECK(ps.at("p")[0] == doctest::Approx(0.9));

  ps.grad("p")[0] = 1.0;
  sgd_step(ps, lr, mu);
  // v2 = 0.9 * 1 + 1 = 1.9, p2 = 0.9 - 0.19.
  CHECK(ps.at("p")[0] == doctest::Approx(0.71));
}

TEST_CASE("glorot_init is bounded and deterministic") {
  Rng r1(5), r2(5), r3(6);
  Tensor a({50, 20}), b({50, 20}), c({50, 20});
  glorot_init(a, 20, 50, r1);
  glorot_init(b, 20, 50, r2);
  glorot_init(c, 20, 50, r3);
  const double bound = std::sqrt(6.0 / (20 + 50));
  double mean = 0.0;
  for (double v : a.data) {
    CHECK(std::abs(v) <= bound);
    mean += v;
  }
  mean /= double(a.data.size());
  CHECK(std::abs(mean) < 0.05);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
}

TEST_CASE("param checkpoints roundtrip exactly") {
  ParamSet ps;
  Rng rng(9);
  ps.add("alpha.w", {3, 4});
  ps.add("beta.b", {7});
  for (auto& [n, e] : ps.entries)
    for (double& v : e.value.data) v = rng.normal();
  ps.meta = "{\"kind\":\"test\",\"h\":20}";

  namespace fs = std::filesystem;
  fs::path file = fs::temp_directory_path() /
                  ("cueplan_params_" + std::to_string(::getpid()) + ".blnn");
  save_params(ps, file);
  ParamSet back = load_params(file);
  fs::remove(file);

  CHECK(back.meta == ps.meta);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.at("alpha.w").shape == std::vector<int>{3, 4});
  CHECK(back.at("alpha.w").data == ps.at("alpha.w").data);
  CHECK(back.at("beta.b").data == ps.at("beta.b").data);

  CHECK_THROWS_AS(load_params(file), IoError);
}

TEST_CASE("total_params counts every coordinate") {
  ParamSet ps;
  ps.add("a", {3, 4});
  ps.add("b", {7});
  CHECK(ps.total_params() == 19);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks. eps = 1e-4, inputs ~ N(0,1) * 0.1,
// relative error below 1e-4 on every checked coordinate.
// ---------------------------------------------------------------------------

TEST_CASE("gradcheck: conv2d across shapes and strides") {
  struct Shape {
    int C, H, W, K, kh, kw, stride;
  };
  const Shape shapes[] = {
      {1, 4, 4, 2, 3, 3, 1},
      {2, 5, 5, 3, 3, 3, 2},
      {3, 6, 6, 2, 2, 2, 2},
      {2, 4, 6, 2, 3, 3, 1},
      {1, 8, 8, 4, 3, 3, 2},
  };
  Rng rng(101);
  for (const Shape& s : shapes) {
    ParamSet ps;
    add_randn(ps, "x", {s.C, s.H, s.W}, rng);
    add_randn(ps, "w", {s.K, s.C, s.kh, s.kw}, rng);
    add_randn(ps, "b", {s.K}, rng);

    Builder build = [&s](Tape& t, ParamSet& p) {
      Var y = t.conv2d(t.param(p, "x"), t.param(p, "w"), t.param(p, "b"),
                       s.stride);
      return sum_sq(t, y);
    };
    CHECK(gradcheck(ps, build, rng) < 1e-4);
  }
}

TEST_CASE("gradcheck: linear across shapes") {
  const std::pair<int, int> shapes[] = {{4, 6}, {10, 2}, {3, 8}, {1, 2}};
  Rng rng(102);
  for (auto [n, m] : shapes) {
    ParamSet ps;
    add_randn(ps, "x", {n}, rng);
    add_randn(ps, "w", {m, n}, rng);
    add_randn(ps, "b", {m}, rng);
    Builder build = [](Tape& t, ParamSet& p) {
      return sum_sq(t, t.linear(t.param(p, "x"), t.param(p, "w"),
                                t.param(p, "b")));
    };
    CHECK(gradcheck(ps, build, rng) < 1e-4);
  }
}

TEST_CASE("gradcheck: elementwise and activation ops") {
  Rng rng(103);
  for (int n : {6, 10}) {
    ParamSet ps;
    Tensor& a = add_randn(ps, "a", {n}, rng);
    add_randn(ps, "b", {n}, rng);
    // Keep ReLU inputs away from the kink where FD is ill-defined.
    for (double& v : a.data)
      if (std::abs(v) < 5e-3) v += 0.05;

    const Builder builders[] = {
        [](Tape& t, ParamSet& p) {
          return sum_sq(t, t.add(t.param(p, "a"), t.param(p, "b")));
        },
        [](Tape& t, ParamSet& p) {
          return sum_sq(t, t.mul(t.param(p, "a"), t.param(p, "b")));
        },
        [](Tape& t, ParamSet& p) {
          return sum_sq(t, t.scale(t.param(p, "a"), -1.7));
        },
        [](Tape& t, ParamSet& p) {
          return sum_sq(t, t.relu(t.param(p, "a")));
        },
        [](Tape& t, ParamSet& p) {
          return sum_sq(t, t.tanh_op(t.param(p, "a")));
        },
        [](Tape& t, ParamSet& p) {
          return sum_sq(t, t.sigmoid(t.param(p, "a")));
        },
        [](Tape& t, ParamSet& p) {
          return sum_sq(t, t.concat({t.param(p, "a"), t.param(p, "b")}));
        },
        [](Tape& t, ParamSet& p) {
          return sum_sq(t, t.slice(t.concat({t.param(p, "a"),
                                             t.param(p, "b")}),
                                   1, 4));
        },
    };
    for (const Builder& b : builders) CHECK(gradcheck(ps, b, rng) < 1e-4);
  }
}

TEST_CASE("gradcheck: weighted_sqdiff with mask and weights") {
  Rng rng(104);
  ParamSet ps;
  add_randn(ps, "pred", {6}, rng);
  Tensor target = randn({6}, rng);
  std::vector<double> weights{0.7, 0.2, 0.1};
  std::vector<double> mask{1.0, 0.0, 1.0};
  Builder build = [&](Tape& t, ParamSet& p) {
    return t.weighted_sqdiff(t.param(p, "pred"), target, weights, mask);
  };
  CHECK(gradcheck(ps, build, rng) < 1e-4);
}

TEST_CASE("gradcheck: lstm_cell and 5-step unroll") {
  Rng rng(105);
  const int in = 3, H = 2;
  ParamSet ps;
  add_randn(ps, "w", {4 * H, in + H}, rng, 0.3);
  add_randn(ps, "b", {4 * H}, rng, 0.3);
  for (int s = 0; s < 5; ++s) {
    add_randn(ps, "x" + std::to_string(s), {in}, rng);
  }

  Builder one = [&](Tape& t, ParamSet& p) {
    auto [h, c] = t.lstm_cell(t.param(p, "x0"), t.constant(Tensor({H})),
                              t.constant(Tensor({H})), t.param(p, "w"),
                              t.param(p, "b"));
    return sum_sq(t, t.concat({h, c}));
  };
  CHECK(gradcheck(ps, one, rng) < 1e-4);

  // Truncated BPTT through 5 chained steps with shared weights.
  Builder chain = [&](Tape& t, ParamSet& p) {
    Var h = t.constant(Tensor({H}));
    Var c = t.constant(Tensor({H}));
    for (int s = 0; s < 5; ++s) {
      auto [h2, c2] = t.lstm_cell(t.param(p, "x" + std::to_string(s)), h, c,
                                  t.param(p, "w"), t.param(p, "b"));
      h = h2;
      c = c2;
    }
    return sum_sq(t, t.concat({h, c}));
  };
  CHECK(gradcheck(ps, chain, rng) < 1e-4);
}

TEST_CASE("gradcheck: conv -> relu -> linear composite") {
  Rng rng(106);
  ParamSet ps;
  add_randn(ps, "x", {1, 6, 6}, rng);
  add_randn(ps, "cw", {2, 1, 3, 3}, rng, 0.3);
  add_randn(ps, "cb", {2}, rng, 0.3);
  add_randn(ps, "lw", {4, 8}, rng, 0.3);
  add_randn(ps, "lb", {4}, rng, 0.3);

  Builder build = [](Tape& t, ParamSet& p) {
    Var y = t.conv2d(t.param(p, "x"), t.param(p, "cw"), t.param(p, "cb"), 2);
    Var z = t.linear(t.relu(y), t.param(p, "lw"), t.param(p, "lb"));
    return sum_sq(t, z);
  };
  CHECK(gradcheck(ps, build, rng) < 1e-4);
}

TEST_CASE("gradcheck: full object-centric forward on a 4x8x8 input") {
  OcArch arch;
  arch.input_res = 8;
  arch.glimpse_size = 64;
  arch.h = 2;
  arch.hidden = 4;
  arch.encoder = 4;
  arch.conv_channels = {4, 8};
  OcModel model = OcModel::create(arch, 77);

  Rng rng(107);
  add_randn(model.params, "zz_input", {4, 8, 8}, rng);
  add_randn(model.params, "zz_force", {2}, rng);
  Tensor target = randn({2 * arch.h}, rng);
  auto weights = horizon_weights(arch.h);
  std::vector<double> mask(size_t(arch.h), 1.0);

  Builder build = [&](Tape& t, ParamSet& p) {
    RecurrentCtxVars ctx{
        t.constant(Tensor({arch.hidden})), t.constant(Tensor({arch.hidden})),
        t.constant(Tensor({arch.hidden})), t.constant(Tensor({arch.hidden}))};
    auto out = model.forward(t, t.param(p, "zz_input"),
                             t.param(p, "zz_force"), ctx);
    return t.weighted_sqdiff(out.pred, target, weights, mask);
  };
  CHECK(gradcheck(model.params, build, rng, 40) < 1e-4);
}
