#include "cueplan/cma.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cueplan/errors.hpp"
#include "cueplan/rng.hpp"

namespace cueplan {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. A is overwritten;
// returns eigenvalues in `eig` and orthonormal eigenvectors as columns of V.
// Plenty for the tiny dimensions the planner uses.
void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& eig,
                  std::vector<double>& v) {
  v.assign(size_t(n) * size_t(n), 0.0);
  for (int i = 0; i < n; ++i) v[size_t(i) * n + i] = 1.0;
  auto A = [&](int r, int c) -> double& { return a[size_t(r) * n + c]; };
  auto V = [&](int r, int c) -> double& { return v[size_t(r) * n + c]; };
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    }
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  eig.resize(size_t(n));
  for (int i = 0; i < n; ++i) eig[size_t(i)] = a[size_t(i) * n + i];
}

}  // namespace

CmaResult cma_es(const std::function<double(const std::vector<double>&)>& objective,
                 std::vector<double> x0, double sigma0, int lambda, int max_evals,
                 uint64_t seed) {
  int n = int(x0.size());
  if (n < 1) throw ValidationError("cma_es needs at least one dimension");
  if (sigma0 <= 0.0) throw ValidationError("sigma0 must be positive");
  if (lambda <= 0) lambda = 4 + int(std::floor(3.0 * std::log(double(n))));
  if (lambda < 4) lambda = 4;
  if (max_evals < lambda) throw ValidationError("max_evals must be >= lambda");

  int mu = lambda / 2;
  std::vector<double> w(static_cast<size_t>(mu));
  for (int i = 0; i < mu; ++i) {
    w[size_t(i)] = std::log(mu + 0.5) - std::log(double(i + 1));
  }
  double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= wsum;
  double mueff = 1.0 / std::inner_product(w.begin(), w.end(), w.begin(), 0.0);

  double cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
  double cs = (mueff + 2.0) / (n + mueff + 5.0);
  double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
  double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) /
                                      ((n + 2.0) * (n + 2.0) + mueff));
  double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs;
  double chi_n = std::sqrt(double(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  std::vector<double> mean = x0;
  double sigma = sigma0;
  std::vector<double> C(size_t(n) * size_t(n), 0.0);
  for (int i = 0; i < n; ++i) C[size_t(i) * n + i] = 1.0;
  std::vector<double> ps(size_t(n), 0.0), pc(size_t(n), 0.0);
  std::vector<double> B, D;  // eigenvectors (columns), sqrt eigenvalues

  Rng rng(seed);
  CmaResult res;
  res.best_value = std::numeric_limits<double>::infinity();

  struct Cand {
    std::vector<double> x, y, z;
    double f = 0.0;
    int idx = 0;
  };

  int evals = 0;
  while (evals < max_evals) {
    // Refresh the eigensystem (cheap at planner dimensions).
    {
      std::vector<double> A = C;
      std::vector<double> eig;
      jacobi_eigen(A, n, eig, B);
      D.resize(size_t(n));
      for (int i = 0; i < n; ++i) D[size_t(i)] = std::sqrt(std::max(eig[size_t(i)], 1e-30));
    }

    int batch = std::min(lambda, max_evals - evals);
    if (batch < lambda) {
      // Not enough budget for a full generation; evaluate what fits for the
      // best-so-far bookkeeping, then stop.
      for (int k = 0; k < batch; ++k) {
        std::vector<double> z(static_cast<size_t>(n)), x(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) z[size_t(i)] = rng.normal();
        for (int i = 0; i < n; ++i) {
          double yi = 0.0;
          for (int j = 0; j < n; ++j) yi += B[size_t(i) * n + j] * D[size_t(j)] * z[size_t(j)];
          x[size_t(i)] = mean[size_t(i)] + sigma * yi;
        }
        double f = objective(x);
        if (!std::isfinite(f)) throw NonFiniteInput("objective returned non-finite value");
        ++evals;
        if (f < res.best_value) {
          res.best_value = f;
          res.best_x = x;
        }
      }
      break;
    }

    std::vector<Cand> cands(static_cast<size_t>(lambda));
    for (int k = 0; k < lambda; ++k) {
      Cand& c = cands[size_t(k)];
      c.idx = k;
      c.z.resize(size_t(n));
      c.y.resize(size_t(n));
      c.x.resize(size_t(n));
      for (int i = 0; i < n; ++i) c.z[size_t(i)] = rng.normal();
      for (int i = 0; i < n; ++i) {
        double yi = 0.0;
        for (int j = 0; j < n; ++j) yi += B[size_t(i) * n + j] * D[size_t(j)] * c.z[size_t(j)];
        c.y[size_t(i)] = yi;
        c.x[size_t(i)] = mean[size_t(i)] + sigma * yi;
      }
    }
    for (Cand& c : cands) {
      c.f = objective(c.x);
      if (!std::isfinite(c.f)) throw NonFiniteInput("objective returned non-finite value");
      ++evals;
      if (c.f < res.best_value) {
        res.best_value = c.f;
        res.best_x = c.x;
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.f != b.f) return a.f < b.f;
      return a.idx < b.idx;
    });

    std::vector<double> yw(size_t(n), 0.0);
    std::vector<double> old_mean = mean;
    for (int i = 0; i < n; ++i) {
      double mi = 0.0;
      for (int k = 0; k < mu; ++k) mi += w[size_t(k)] * cands[size_t(k)].x[size_t(i)];
      mean[size_t(i)] = mi;
      yw[size_t(i)] = (mi - old_mean[size_t(i)]) / sigma;
    }

    // ps <- (1-cs) ps + sqrt(cs(2-cs) mueff) C^{-1/2} yw
    std::vector<double> cinv_yw(size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
      // C^{-1/2} = B D^{-1} B^T
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        double btyw = 0.0;
        for (int k = 0; k < n; ++k) btyw += B[size_t(k) * n + j] * yw[size_t(k)];
        acc += B[size_t(i) * n + j] / D[size_t(j)] * btyw;
      }
      cinv_yw[size_t(i)] = acc;
    }
    double csn = std::sqrt(cs * (2.0 - cs) * mueff);
    double ps_norm2 = 0.0;
    for (int i = 0; i < n; ++i) {
      ps[size_t(i)] = (1.0 - cs) * ps[size_t(i)] + csn * cinv_yw[size_t(i)];
      ps_norm2 += ps[size_t(i)] * ps[size_t(i)];
    }
    double gen_count = double(evals) / lambda;
    double hsig_lhs = std::sqrt(ps_norm2) /
                      std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * gen_count)) / chi_n;
    double hsig = hsig_lhs < 1.4 + 2.0 / (n + 1.0) ? 1.0 : 0.0;

    double ccn = std::sqrt(cc * (2.0 - cc) * mueff);
    for (int i = 0; i < n; ++i) {
      pc[size_t(i)] = (1.0 - cc) * pc[size_t(i)] + hsig * ccn * yw[size_t(i)];
    }

    double c1a = c1 * (1.0 - (1.0 - hsig * hsig) * cc * (2.0 - cc));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double rank_mu = 0.0;
        for (int k = 0; k < mu; ++k) {
          rank_mu += w[size_t(k)] * cands[size_t(k)].y[size_t(i)] * cands[size_t(k)].y[size_t(j)];
        }
        C[size_t(i) * n + j] = (1.0 - c1a - cmu) * C[size_t(i) * n + j] +
                               c1 * pc[size_t(i)] * pc[size_t(j)] + cmu * rank_mu;
      }
    }
    // Keep C numerically symmetric.
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        double v = 0.5 * (C[size_t(i) * n + j] + C[size_t(j) * n + i]);
        C[size_t(i) * n + j] = C[size_t(j) * n + i] = v;
      }
    }

    sigma *= std::exp(cs / damps * (std::sqrt(ps_norm2) / chi_n - 1.0));

    if (sigma < 1e-14) break;  // converged to numerical resolution
  }
  res.evals = evals;
  res.budget_exhausted = evals >= max_evals;
  return res;
}

}  // namespace cueplan
