#pragma once

#include <functional>
#include <vector>

#include "cueplan/params.hpp"
#include "cueplan/tensor.hpp"

namespace cueplan {

/// Handle to a tape node.
struct Var {
  int id = -1;
};

/// Eager reverse-mode tape. Ops compute forward immediately and record a
/// closure that propagates adjoints; backward() replays closures in reverse
/// creation order (which is a valid topological order by construction).
///
/// Parameter leaves additionally accumulate their adjoints into the owning
/// ParamSet's grad buffers, so gradients can be summed across many tapes
/// (one per batch item) before an optimizer step.
class Tape {
 public:
  /// Leaf holding a copy of t; no gradient is reported anywhere.
  Var constant(const Tensor& t);
  /// Leaf bound to params[name]; backward adds the adjoint to its grad.
  Var param(ParamSet& params, const std::string& name);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;

  /// y = x (values copied); used to re-root a tensor from another tape.
  Var input(const Tensor& t) { return constant(t); }

  // --- primitives ----------------------------------------------------------
  /// Valid cross-correlation, stride >= 1. x: [C,H,W], w: [K,C,kh,kw], b: [K].
  Var conv2d(Var x, Var w, Var b, int stride);
  /// y = W x + b. x: [n], W: [m,n], b: [m].
  Var linear(Var x, Var w, Var b);
  Var add(Var a, Var b);        // elementwise, equal shapes
  Var mul(Var a, Var b);        // elementwise, equal shapes
  Var scale(Var x, double c);   // y = c * x
  Var relu(Var x);
  Var tanh_op(Var x);
  Var sigmoid(Var x);
  /// Concatenation of flattened inputs into a vector.
  Var concat(const std::vector<Var>& xs);
  /// y = x[offset .. offset+len) of the flattened input.
  Var slice(Var x, int offset, int len);

  /// Scalar: sum_k weights[k] * mask[k] * |pred_k - target_k|^2 where pred
  /// and target are [h,2] (flattened) and weights/mask are [h].
  Var weighted_sqdiff(Var pred, const Tensor& target, const std::vector<double>& weights,
                      const std::vector<double>& mask);

  /// Standard LSTM cell built from the primitives above. Gate layout in the
  /// packed weight matrix is [input, forget, candidate, output].
  /// w: [4H, in+H], b: [4H]. Returns (h, c).
  std::pair<Var, Var> lstm_cell(Var x, Var h_prev, Var c_prev, Var w, Var b);

  /// Seeds d(loss)/d(loss) = seed and propagates. loss must be scalar.
  /// May be called once per tape.
  void backward(Var loss, double seed = 1.0);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor adjoint;
    std::function<void()> back;  // empty for leaves without parents
  };
  std::vector<Node> nodes_;

  Var make(Tensor value);
  Tensor& adj(Var v);
};

/// Penalty weights w_k = exp(-k^(1/4)), k = 1..h.
std::vector<double> horizon_weights(int h);

}  // namespace cueplan
