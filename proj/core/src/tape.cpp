#include "cueplan/tape.hpp"

#include <cmath>

#include "cueplan/errors.hpp"

namespace cueplan {

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::vector<double> horizon_weights(int h) {
  std::vector<double> w(static_cast<size_t>(h));
  for (int k = 1; k <= h; ++k) {
    w[size_t(k - 1)] = std::exp(-std::pow(double(k), 0.25));
  }
  return w;
}

Var Tape::make(Tensor value) {
  Node n;
  n.adjoint = Tensor(value.shape);
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{int(nodes_.size()) - 1};
}

Tensor& Tape::adj(Var v) { return nodes_[size_t(v.id)].adjoint; }

const Tensor& Tape::value(Var v) const { return nodes_[size_t(v.id)].value; }
const Tensor& Tape::grad(Var v) const { return nodes_[size_t(v.id)].adjoint; }

Var Tape::constant(const Tensor& t) { return make(t); }

Var Tape::param(ParamSet& params, const std::string& name) {
  Var v = make(params.at(name));
  Tensor* sink = &params.grad(name);
  int id = v.id;
  nodes_[size_t(id)].back = [this, id, sink] {
    const Tensor& a = nodes_[size_t(id)].adjoint;
    for (size_t i = 0; i < a.data.size(); ++i) sink->data[i] += a.data[i];
  };
  return v;
}

Var Tape::conv2d(Var x, Var w, Var b, int stride) {
  const Tensor& xt = value(x);
  const Tensor& wt = value(w);
  const Tensor& bt = value(b);
  if (xt.shape.size() != 3 || wt.shape.size() != 4 || bt.shape.size() != 1) {
    throw ShapeMismatch("conv2d expects x[C,H,W], w[K,C,kh,kw], b[K]");
  }
  int C = xt.shape[0], H = xt.shape[1], W = xt.shape[2];
  int K = wt.shape[0], kh = wt.shape[2], kw = wt.shape[3];
  if (wt.shape[1] != C || bt.shape[0] != K || kh > H || kw > W || stride < 1) {
    throw ShapeMismatch("conv2d shape mismatch: x=" + shape_str(xt.shape) +
                        " w=" + shape_str(wt.shape));
  }
  int Ho = (H - kh) / stride + 1;
  int Wo = (W - kw) / stride + 1;
  Tensor out({K, Ho, Wo});
  const double* xd = xt.data.data();
  const double* wd = wt.data.data();
  for (int k = 0; k < K; ++k) {
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        double acc = bt.data[size_t(k)];
        for (int c = 0; c < C; ++c) {
          const double* xrow = xd + (size_t(c) * H + size_t(oy * stride)) * W + ox * stride;
          const double* wrow = wd + ((size_t(k) * C + size_t(c)) * kh) * kw;
          for (int dy = 0; dy < kh; ++dy) {
            for (int dx = 0; dx < kw; ++dx) acc += wrow[dy * kw + dx] * xrow[dy * W + dx];
          }
        }
        out.data[(size_t(k) * Ho + size_t(oy)) * Wo + size_t(ox)] = acc;
      }
    }
  }
  Var y = make(std::move(out));
  int xi = x.id, wi = w.id, bi = b.id, yi = y.id;
  nodes_[size_t(yi)].back = [this, xi, wi, bi, yi, C, H, W, K, kh, kw, Ho, Wo, stride] {
    const Tensor& g = nodes_[size_t(yi)].adjoint;
    const Tensor& xt2 = nodes_[size_t(xi)].value;
    const Tensor& wt2 = nodes_[size_t(wi)].value;
    Tensor& gx = nodes_[size_t(xi)].adjoint;
    Tensor& gw = nodes_[size_t(wi)].adjoint;
    Tensor& gb = nodes_[size_t(bi)].adjoint;
    for (int k = 0; k < K; ++k) {
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          double go = g.data[(size_t(k) * Ho + size_t(oy)) * Wo + size_t(ox)];
          if (go == 0.0) continue;
          gb.data[size_t(k)] += go;
          for (int c = 0; c < C; ++c) {
            size_t xoff = (size_t(c) * H + size_t(oy * stride)) * W + size_t(ox * stride);
            size_t woff = (size_t(k) * C + size_t(c)) * kh * kw;
            for (int dy = 0; dy < kh; ++dy) {
              for (int dx = 0; dx < kw; ++dx) {
                gw.data[woff + size_t(dy * kw + dx)] +=
                    go * xt2.data[xoff + size_t(dy * W + dx)];
                gx.data[xoff + size_t(dy * W + dx)] +=
                    go * wt2.data[woff + size_t(dy * kw + dx)];
              }
            }
          }
        }
      }
    }
  };
  return y;
}

Var Tape::linear(Var x, Var w, Var b) {
  const Tensor& xt = value(x);
  const Tensor& wt = value(w);
  const Tensor& bt = value(b);
  if (wt.shape.size() != 2 || bt.shape.size() != 1) {
    throw ShapeMismatch("linear expects w[m,n], b[m]");
  }
  int m = wt.shape[0], n = wt.shape[1];
  if (xt.numel() != n || bt.shape[0] != m) {
    throw ShapeMismatch("linear shape mismatch: x=" + shape_str(xt.shape) +
                        " w=" + shape_str(wt.shape));
  }
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    double acc = bt.data[size_t(i)];
    const double* row = wt.data.data() + size_t(i) * size_t(n);
    for (int j = 0; j < n; ++j) acc += row[j] * xt.data[size_t(j)];
    out.data[size_t(i)] = acc;
  }
  Var y = make(std::move(out));
  int xi = x.id, wi = w.id, bi = b.id, yi = y.id;
  nodes_[size_t(yi)].back = [this, xi, wi, bi, yi, m, n] {
    const Tensor& g = nodes_[size_t(yi)].adjoint;
    const Tensor& xt2 = nodes_[size_t(xi)].value;
    const Tensor& wt2 = nodes_[size_t(wi)].value;
    Tensor& gx = nodes_[size_t(xi)].adjoint;
    Tensor& gw = nodes_[size_t(wi)].adjoint;
    Tensor& gb = nodes_[size_t(bi)].adjoint;
    for (int i = 0; i < m; ++i) {
      double gi = g.data[size_t(i)];
      if (gi == 0.0) continue;
      gb.data[size_t(i)] += gi;
      const double* row = wt2.data.data() + size_t(i) * size_t(n);
      double* gwrow = gw.data.data() + size_t(i) * size_t(n);
      for (int j = 0; j < n; ++j) {
        gwrow[j] += gi * xt2.data[size_t(j)];
        gx.data[size_t(j)] += gi * row[j];
      }
    }
  };
  return y;
}

Var Tape::add(Var a, Var b) {
  const Tensor& at = value(a);
  const Tensor& bt = value(b);
  if (!same_shape(at, bt)) throw ShapeMismatch("add shape mismatch");
  Tensor out = at;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bt.data[i];
  Var y = make(std::move(out));
  int ai = a.id, bi = b.id, yi = y.id;
  nodes_[size_t(yi)].back = [this, ai, bi, yi] {
    const Tensor& g = nodes_[size_t(yi)].adjoint;
    Tensor& ga = nodes_[size_t(ai)].adjoint;
    Tensor& gb = nodes_[size_t(bi)].adjoint;
    for (size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] += g.data[i];
    }
  };
  return y;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& at = value(a);
  const Tensor& bt = value(b);
  if (!same_shape(at, bt)) throw ShapeMismatch("mul shape mismatch");
  Tensor out = at;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bt.data[i];
  Var y = make(std::move(out));
  int ai = a.id, bi = b.id, yi = y.id;
  nodes_[size_t(yi)].back = [this, ai, bi, yi] {
    const Tensor& g = nodes_[size_t(yi)].adjoint;
    Tensor& ga = nodes_[size_t(ai)].adjoint;
    Tensor& gb = nodes_[size_t(bi)].adjoint;
    const Tensor& av = nodes_[size_t(ai)].value;
    const Tensor& bv = nodes_[size_t(bi)].value;
    for (size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i] * bv.data[i];
      gb.data[i] += g.data[i] * av.data[i];
    }
  };
  return y;
}

Var Tape::scale(Var x, double c) {
  Tensor out = value(x);
  for (double& v : out.data) v *= c;
  Var y = make(std::move(out));
  int xi = x.id, yi = y.id;
  nodes_[size_t(yi)].back = [this, xi, yi, c] {
    const Tensor& g = nodes_[size_t(yi)].adjoint;
    Tensor& gx = nodes_[size_t(xi)].adjoint;
    for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += c * g.data[i];
  };
  return y;
}

Var Tape::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  Var y = make(std::move(out));
  int xi = x.id, yi = y.id;
  nodes_[size_t(yi)].back = [this, xi, yi] {
    const Tensor& g = nodes_[size_t(yi)].adjoint;
    const Tensor& xv = nodes_[size_t(xi)].value;
    Tensor& gx = nodes_[size_t(xi)].adjoint;
    for (size_t i = 0; i < g.data.size(); ++i) {
      if (xv.data[i] > 0.0) gx.data[i] += g.data[i];
    }
  };
  return y;
}

Var Tape::tanh_op(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::tanh(v);
  Var y = make(std::move(out));
  int xi = x.id, yi = y.id;
  nodes_[size_t(yi)].back = [this, xi, yi] {
    const Tensor& g = nodes_[size_t(yi)].adjoint;
    const Tensor& yv = nodes_[size_t(yi)].value;
    Tensor& gx = nodes_[size_t(xi)].adjoint;
    for (size_t i = 0; i < g.data.size(); ++i) {
      gx.data[i] += g.data[i] * (1.0 - yv.data[i] * yv.data[i]);
    }
  };
  return y;
}

Var Tape::sigmoid(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  Var y = make(std::move(out));
  int xi = x.id, yi = y.id;
  nodes_[size_t(yi)].back = [this, xi, yi] {
    const Tensor& g = nodes_[size_t(yi)].adjoint;
    const Tensor& yv = nodes_[size_t(yi)].value;
    Tensor& gx = nodes_[size_t(xi)].adjoint;
    for (size_t i = 0; i < g.data.size(); ++i) {
      gx.data[i] += g.data[i] * yv.data[i] * (1.0 - yv.data[i]);
    }
  };
  return y;
}

Var Tape::concat(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeMismatch("concat of nothing");
  long long total = 0;
  for (Var v : xs) total += value(v).numel();
  Tensor out({int(total)});
  size_t off = 0;
  for (Var v : xs) {
    const Tensor& t = value(v);
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + long(off));
    off += t.data.size();
  }
  Var y = make(std::move(out));
  std::vector<int> ids;
  for (Var v : xs) ids.push_back(v.id);
  int yi = y.id;
  nodes_[size_t(yi)].back = [this, ids, yi] {
    const Tensor& g = nodes_[size_t(yi)].adjoint;
    size_t o = 0;
    for (int id : ids) {
      Tensor& gx = nodes_[size_t(id)].adjoint;
      for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g.data[o + i];
      o += gx.data.size();
    }
  };
  return y;
}

Var Tape::slice(Var x, int offset, int len) {
  const Tensor& xt = value(x);
  if (offset < 0 || len < 1 || offset + len > xt.numel()) {
    throw ShapeMismatch("slice out of range");
  }
  Tensor out({len});
  std::copy(xt.data.begin() + offset, xt.data.begin() + offset + len,
            out.data.begin());
  Var y = make(std::move(out));
  int xi = x.id, yi = y.id;
  nodes_[size_t(yi)].back = [this, xi, yi, offset, len] {
    const Tensor& g = nodes_[size_t(yi)].adjoint;
    Tensor& gx = nodes_[size_t(xi)].adjoint;
    for (int i = 0; i < len; ++i) gx.data[size_t(offset + i)] += g.data[size_t(i)];
  };
  return y;
}

Var Tape::weighted_sqdiff(Var pred, const Tensor& target,
                          const std::vector<double>& weights,
                          const std::vector<double>& mask) {
  const Tensor& pt = value(pred);
  int h = int(weights.size());
  if (pt.numel() != 2 * h || target.numel() != 2 * h || mask.size() != size_t(h)) {
    throw ShapeMismatch("weighted_sqdiff expects pred/target of length 2h");
  }
  double loss = 0.0;
  for (int k = 0; k < h; ++k) {
    double dx = pt.data[size_t(2 * k)] - target.data[size_t(2 * k)];
    double dy = pt.data[size_t(2 * k + 1)] - target.data[size_t(2 * k + 1)];
    loss += weights[size_t(k)] * mask[size_t(k)] * (dx * dx + dy * dy);
  }
  Var y = make(Tensor({1}, {loss}));
  int pi = pred.id, yi = y.id;
  Tensor tgt = target;
  nodes_[size_t(yi)].back = [this, pi, yi, tgt, weights, mask, h] {
    double g = nodes_[size_t(yi)].adjoint.data[0];
    const Tensor& pv = nodes_[size_t(pi)].value;
    Tensor& gp = nodes_[size_t(pi)].adjoint;
    for (int k = 0; k < h; ++k) {
      double wm = 2.0 * g * weights[size_t(k)] * mask[size_t(k)];
      gp.data[size_t(2 * k)] += wm * (pv.data[size_t(2 * k)] - tgt.data[size_t(2 * k)]);
      gp.data[size_t(2 * k + 1)] +=
          wm * (pv.data[size_t(2 * k + 1)] - tgt.data[size_t(2 * k + 1)]);
    }
  };
  return y;
}

std::pair<Var, Var> Tape::lstm_cell(Var x, Var h_prev, Var c_prev, Var w, Var b) {
  int H = int(value(c_prev).numel());
  if (value(h_prev).numel() != H) throw ShapeMismatch("lstm hidden/cell size mismatch");
  Var xin = concat({x, h_prev});
  Var pre = linear(xin, w, b);
  if (value(pre).numel() != 4 * H) throw ShapeMismatch("lstm packed weights must be [4H, in+H]");
  Var i = sigmoid(slice(pre, 0, H));
  Var f = sigmoid(slice(pre, H, H));
  Var g = tanh_op(slice(pre, 2 * H, H));
  Var o = sigmoid(slice(pre, 3 * H, H));
  Var c = add(mul(f, c_prev), mul(i, g));
  Var h = mul(o, tanh_op(c));
  return {h, c};
}

void Tape::backward(Var loss, double seed) {
  Tensor& a = adj(loss);
  if (a.numel() != 1) throw NotScalarLoss("backward root must be scalar");
  a.data[0] += seed;
  for (size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back();
  }
}

}  // namespace cueplan
