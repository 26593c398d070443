#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "histoseg/core/tensor.hpp"
#include "histoseg/postprocess/postprocess.hpp"

namespace testsupport {

// Brute-force mean field over every pixel pair, the same literal message
// sum_{j != i} K_ij (1 - Q_j(l)) as the fast path but with no window
// truncation and no lookup tables. O(N^2) per round, test sizes only.
inline histoseg::core::Tensor crf_brute_force(const histoseg::postprocess::CrfProblem& problem) {
  using histoseg::core::Tensor;
  const Tensor& unary = problem.unary;
  const int labels = unary.dim(0), h = unary.dim(1), w = unary.dim(2);
  const size_t n = static_cast<size_t>(h) * w;
  const auto& p = problem.params;

  std::vector<double> q(static_cast<size_t>(labels) * n);
  for (size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int l = 0; l < labels; ++l) {
      q[static_cast<size_t>(l) * n + i] = std::exp(-unary.data[static_cast<size_t>(l) * n + i]);
      sum += q[static_cast<size_t>(l) * n + i];
    }
    for (int l = 0; l < labels; ++l) q[static_cast<size_t>(l) * n + i] /= sum;
  }

  const double* ir = problem.intensities.data.data();
  const double* ig = ir + n;
  const double* ib = ig + n;

  std::vector<double> next(q.size());
  std::vector<double> msg(static_cast<size_t>(labels));
  for (int it = 0; it < p.iterations; ++it) {
    for (size_t i = 0; i < n; ++i) {
      const int yi = static_cast<int>(i) / w, xi = static_cast<int>(i) % w;
      for (int l = 0; l < labels; ++l) msg[static_cast<size_t>(l)] = 0.0;
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const int yj = static_cast<int>(j) / w, xj = static_cast<int>(j) % w;
        const double d2 = static_cast<double>(yi - yj) * (yi - yj) +
                          static_cast<double>(xi - xj) * (xi - xj);
        const double dr = ir[i] - ir[j], dg = ig[i] - ig[j], db = ib[i] - ib[j];
        const double c2 = dr * dr + dg * dg + db * db;
        const double k = p.w1 * std::exp(-d2 / (2.0 * p.sa * p.sa)) +
                         p.w2 * std::exp(-d2 / (2.0 * p.sb * p.sb) - c2 / (2.0 * p.sg * p.sg));
        for (int l = 0; l < labels; ++l)
          msg[static_cast<size_t>(l)] += k * (1.0 - q[static_cast<size_t>(l) * n + j]);
      }
      double mx = -1e300;
      for (int l = 0; l < labels; ++l) {
        const double e = -unary.data[static_cast<size_t>(l) * n + i] - msg[static_cast<size_t>(l)];
        next[static_cast<size_t>(l) * n + i] = e;
        if (e > mx) mx = e;
      }
      double sum = 0.0;
      for (int l = 0; l < labels; ++l) {
        double& v = next[static_cast<size_t>(l) * n + i];
        v = std::exp(v - mx);
        sum += v;
      }
      for (int l = 0; l < labels; ++l) next[static_cast<size_t>(l) * n + i] /= sum;
    }
    std::swap(q, next);
  }

  Tensor out = Tensor::zeros({labels, h, w});
  out.data = std::move(q);
  return out;
}

}  // namespace testsupport
