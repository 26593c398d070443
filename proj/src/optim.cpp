#include "histoseg/pipeline/optim.hpp"

#include <cmath>

#include "histoseg/core/error.hpp"

namespace histoseg::pipeline {

AdamW::AdamW(AdamWConfig cfg) : cfg_(cfg) {
  if (cfg.lr <= 0) core::fail(core::Error::Kind::argument, "AdamW: lr must be > 0");
  if (cfg.beta1 < 0 || cfg.beta1 >= 1 || cfg.beta2 < 0 || cfg.beta2 >= 1)
    core::fail(core::Error::Kind::argument, "AdamW: betas must lie in [0,1)");
  if (cfg.eps <= 0) core::fail(core::Error::Kind::argument, "AdamW: eps must be > 0");
  if (cfg.weight_decay < 0) core::fail(core::Error::Kind::argument, "AdamW: weight_decay must be >= 0");
}

double AdamW::step(core::ParamStore& store) {
  double sq = 0.0;
  for (const auto& p : store.items()) {
    if (p->grad.empty()) continue;
    for (double g : p->grad.data) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double scale = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (const auto& p : store.items()) {
    if (p->m.empty()) p->m = core::Tensor::zeros(p->value.shape);
    if (p->v.empty()) p->v = core::Tensor::zeros(p->value.shape);
    const bool has_grad = !p->grad.empty();
    for (size_t i = 0; i < p->value.data.size(); ++i) {
      const double g = has_grad ? p->grad.data[i] * scale : 0.0;
      double& m = p->m.data[i];
      double& v = p->v.data[i];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      double& w = p->value.data[i];
      w -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w);
    }
  }
  return norm;
}

}  // namespace histoseg::pipeline
