#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace cueplan {

/// Planner-facing search settings. lambda/sigma0/max_evals/seed drive the
/// generic optimizer; the bounds and parameterization describe how the
/// 2-d search point maps to a force (see planner.cpp).
struct CmaConfig {
  int lambda = 6;  // 4 + floor(3 ln n) at n = 2
  double sigma0 = 0.3;
  int max_evals = 180;
  uint64_t seed = 0;
  std::array<double, 2> force_mag_range{30000.0, 80000.0};
  enum class Param { polar, cartesian } parameterization = Param::polar;
};

struct CmaResult {
  std::vector<double> best_x;
  double best_value = 0.0;
  int evals = 0;
  /// True when the run stopped because max_evals was reached rather than by
  /// convergence; best-so-far is still valid.
  bool budget_exhausted = false;
};

/// Standard (mu/mu_w, lambda) covariance matrix adaptation: rank-based
/// weighted recombination, cumulative step-size control, rank-one and
/// rank-mu covariance updates. Deterministic in seed. lambda <= 0 selects
/// 4 + floor(3 ln n). Best-so-far tracks raw evaluations, so it is
/// non-increasing in evaluation count.
CmaResult cma_es(const std::function<double(const std::vector<double>&)>& objective,
                 std::vector<double> x0, double sigma0, int lambda, int max_evals,
                 uint64_t seed);

}  // namespace cueplan
