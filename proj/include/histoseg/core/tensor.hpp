#pragma once

#include <cassert>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "histoseg/core/rng.hpp"

namespace histoseg::core {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Dense row-major tensor of doubles. All model math runs in double so the
// finite-difference gradient checks are limited by step size, not precision.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    assert(shape_numel(shape) == static_cast<int64_t>(data.size()));
  }

  static Tensor zeros(Shape s) {
    auto n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), 0.0));
  }
  static Tensor full(Shape s, double v) {
    auto n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), v));
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool empty() const { return data.empty(); }

  double& operator()(int i) {
    assert(rank() == 1);
    return data[static_cast<size_t>(i)];
  }
  double operator()(int i) const {
    assert(rank() == 1);
    return data[static_cast<size_t>(i)];
  }
  double& operator()(int i, int j) {
    assert(rank() == 2);
    return data[static_cast<size_t>(i) * dim(1) + j];
  }
  double operator()(int i, int j) const {
    assert(rank() == 2);
    return data[static_cast<size_t>(i) * dim(1) + j];
  }
  // Channel-major (C, H, W) accessor.
  double& operator()(int c, int y, int x) {
    assert(rank() == 3);
    return data[(static_cast<size_t>(c) * dim(1) + y) * dim(2) + x];
  }
  double operator()(int c, int y, int x) const {
    assert(rank() == 3);
    return data[(static_cast<size_t>(c) * dim(1) + y) * dim(2) + x];
  }
};

inline Tensor randn(Shape s, Rng& rng, double stdev = 1.0) {
  Tensor t = Tensor::zeros(std::move(s));
  for (auto& v : t.data) v = rng.normal() * stdev;
  return t;
}

}  // namespace histoseg::core
