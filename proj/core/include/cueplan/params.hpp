#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "cueplan/rng.hpp"
#include "cueplan/tensor.hpp"

namespace cueplan {

/// Named learnable tensors with matching gradient and momentum buffers.
/// Ordered by name so every iteration (init, update, serialization) is
/// deterministic. Gradients accumulate across backward passes until
/// sgd_step consumes and zeroes them. Momentum buffers are transient
/// (not serialized); each training stage starts them at zero.
struct ParamSet {
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor velocity;
  };
  std::map<std::string, Entry> entries;
  /// Free-form architecture descriptor (JSON text) stored in checkpoints.
  std::string meta;

  Tensor& add(const std::string& name, std::vector<int> shape);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  Tensor& grad(const std::string& name);
  bool has(const std::string& name) const { return entries.count(name) != 0; }
  void zero_grads();
  long long total_params() const;
};

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
void glorot_init(Tensor& t, int fan_in, int fan_out, Rng& rng);

/// Classical momentum: v <- momentum * v + g; p <- p - lr * v.
/// Zeroes all gradients afterwards.
void sgd_step(ParamSet& params, double lr, double momentum);

/// Checkpoint format "BLNN1", little-endian:
///   magic[5], u32 meta_len, meta bytes (JSON),
///   entries until EOF: u32 name_len, name, u32 ndim, u32 dims[], f64 data[].
void save_params(const ParamSet& params, const std::filesystem::path& file);
ParamSet load_params(const std::filesystem::path& file);

}  // namespace cueplan
