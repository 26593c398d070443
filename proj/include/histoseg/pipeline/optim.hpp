#pragma once

#include <cstdint>

#include "histoseg/core/autograd.hpp"

namespace histoseg::pipeline {

struct AdamWConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.001;
  double clip_norm = 5.0;  // global gradient norm ceiling; <= 0 disables
};

// Adam with decoupled weight decay over every parameter in the store; the
// store holds nothing but trainables, so no masking is needed. Gradients are
// clipped to a global norm before the moment updates.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg);

  // Consumes the accumulated gradients (caller zeroes them afterwards).
  // Returns the pre-clip global gradient norm.
  double step(core::ParamStore& store);

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace histoseg::pipeline
