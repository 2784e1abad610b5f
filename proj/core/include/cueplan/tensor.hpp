#pragma once

#include <string>
#include <vector>

namespace cueplan {

/// Dense row-major tensor of doubles. Only the handful of shapes the
/// predictors need; no broadcasting.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(size_t(numel_of(shape)), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {}

  static long long numel_of(const std::vector<int>& s) {
    long long n = 1;
    for (int d : s) n *= d;
    return n;
  }
  long long numel() const { return (long long)data.size(); }

  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }
};

bool same_shape(const Tensor& a, const Tensor& b);
std::string shape_str(const std::vector<int>& shape);

}  // namespace cueplan
