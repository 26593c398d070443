#pragma once

// Finite-difference gradient oracle. Deliberately independent of the tape in
// histoseg/core/autograd.hpp: it only re-evaluates a double-valued closure
// around perturbed inputs, so it cannot inherit a bug from an op's backward.

#include <cmath>
#include <functional>

#include "histoseg/core/autograd.hpp"
#include "histoseg/core/tensor.hpp"

namespace testsupport {

inline double fd_central(const std::function<double()>& f, double* slot, double h) {
  const double x0 = *slot;
  *slot = x0 + h;
  const double fp = f();
  *slot = x0 - h;
  const double fm = f();
  *slot = x0;
  return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor_abs = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor_abs});
}

// Test-only reduction: scalar = sum(x * w) with fixed constant weights, so any
// op output can be collapsed to a checkable scalar. Backward is one line and
// verified by the add/scale FD tests before anything relies on it.
inline histoseg::core::Var wsum(histoseg::core::Graph& g, histoseg::core::Var x,
                                const histoseg::core::Tensor& w) {
  double acc = 0.0;
  for (size_t i = 0; i < x->val.data.size(); ++i) acc += x->val.data[i] * w.data[i];
  histoseg::core::Node* n = g.make(histoseg::core::Tensor::scalar(acc), x->needs);
  if (n->needs) n->back = [n, x, w] {
    auto& gx = histoseg::core::Graph::grad_of(x);
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += n->grad.data[0] * w.data[i];
  };
  return n;
}

// Sweeps every element of src, comparing analytic against central differences.
// Returns the worst relative error seen.
inline double max_fd_rel_err(const std::function<double()>& eval, histoseg::core::Tensor& src,
                             const histoseg::core::Tensor& analytic, double h = 1e-6) {
  double worst = 0.0;
  for (size_t i = 0; i < src.data.size(); ++i) {
    const double fd = fd_central(eval, &src.data[i], h);
    worst = std::max(worst, rel_err(analytic.data[i], fd));
  }
  return worst;
}

}  // namespace testsupport
