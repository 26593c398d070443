#include "histoseg/encoders/adapters.hpp"

#include <cmath>
#include <sstream>

#include "histoseg/core/error.hpp"
#include "histoseg/core/interp.hpp"

namespace histoseg::encoders {

AdapterStack::AdapterStack(core::ParamStore& store, AdapterConfig cfg,
                           core::Rng& rng)
    : cfg_(cfg) {
  if (cfg_.channels <= 0 || cfg_.hidden <= 0 || cfg_.levels <= 0)
    core::fail(core::Error::Kind::argument, "bad adapter config");
  const double s_in = 1.0 / std::sqrt(static_cast<double>(cfg_.channels));
  for (int k = 1; k <= cfg_.levels; ++k) {
    const std::string p = "adapter" + std::to_string(k) + ".";
    LevelParams lp;
    lp.pre_w = &store.create(p + "pre.w",
                             core::randn({cfg_.hidden, cfg_.channels}, rng, s_in));
    lp.pre_b = &store.create(p + "pre.b", core::Tensor::zeros({cfg_.hidden}));
    lp.pre_gamma = &store.create(p + "pre_norm.gamma",
                                 core::Tensor::full({cfg_.hidden}, 1.0));
    lp.pre_beta = &store.create(p + "pre_norm.beta",
                                core::Tensor::zeros({cfg_.hidden}));
    lp.dw_w = &store.create(p + "dw.w",
                            core::randn({cfg_.hidden, 3, 3}, rng, 1.0 / 3.0));
    lp.dw_b = &store.create(p + "dw.b", core::Tensor::zeros({cfg_.hidden}));
    lp.dw_gamma = &store.create(p + "dw_norm.gamma",
                                core::Tensor::full({cfg_.hidden}, 1.0));
    lp.dw_beta = &store.create(p + "dw_norm.beta",
                               core::Tensor::zeros({cfg_.hidden}));
    // Zero exit keeps the stack an identity until training moves it.
    lp.post_w = &store.create(p + "post.w",
                              core::Tensor::zeros({cfg_.channels, cfg_.hidden}));
    lp.post_b = &store.create(p + "post.b", core::Tensor::zeros({cfg_.channels}));
    levels_.push_back(lp);
  }
}

core::Var AdapterStack::apply(core::Graph& g, int level, core::Var x) const {
  if (level < 1 || level > static_cast<int>(levels_.size()))
    core::fail(core::Error::Kind::argument,
               "adapter level out of range: " + std::to_string(level));
  if (x->val.rank() != 3 || x->val.dim(0) != cfg_.channels)
    core::fail(core::Error::Kind::shape,
               "adapter expects (" + std::to_string(cfg_.channels) +
                   ", h, w) input, got " + core::shape_str(x->val.shape));
  const LevelParams& lp = levels_[static_cast<size_t>(level - 1)];
  core::Var h = core::conv1x1(g, x, g.param(*lp.pre_w), g.param(*lp.pre_b));
  h = core::channel_norm(g, h, g.param(*lp.pre_gamma), g.param(*lp.pre_beta),
                         cfg_.norm_eps);
  h = core::gelu(g, h);
  h = core::dwconv3x3(g, h, g.param(*lp.dw_w), g.param(*lp.dw_b));
  h = core::channel_norm(g, h, g.param(*lp.dw_gamma), g.param(*lp.dw_beta),
                         cfg_.norm_eps);
  h = core::gelu(g, h);
  h = core::conv1x1(g, h, g.param(*lp.post_w), g.param(*lp.post_b));
  return core::add(g, x, h);
}

std::vector<std::pair<int, int>> pyramid_grids(const FeaturePyramid& p) {
  std::vector<std::pair<int, int>> out;
  for (int k = 0; k < p.level_count(); ++k) out.push_back(p.grid(k));
  return out;
}

RefinedPyramid adapt(core::Graph& g, const FeaturePyramid& student,
                     const std::vector<std::pair<int, int>>& guidance_grids,
                     const AdapterStack& adapters) {
  if (student.level_count() != adapters.config().levels ||
      static_cast<int>(guidance_grids.size()) != adapters.config().levels)
    core::fail(core::Error::Kind::shape,
               "pyramid / adapter level count mismatch");
  RefinedPyramid out;
  for (int k = 0; k < student.level_count(); ++k) {
    const core::Tensor& f = student.levels[static_cast<size_t>(k)];
    if (f.dim(0) != adapters.config().channels)
      core::fail(core::Error::Kind::shape,
                 "student channels do not match adapter width");
    const auto [gh, gw] = guidance_grids[static_cast<size_t>(k)];
    core::Tensor aligned =
        (f.dim(1) == gh && f.dim(2) == gw)
            ? f
            : core::resize_bilinear_chw(f, gh, gw);
    core::Var v = adapters.apply(g, k + 1, g.constant(std::move(aligned)));
    out.grids.emplace_back(gh, gw);
    out.levels.push_back(v);
  }
  return out;
}

ParameterReport report_parameters(const core::ParamStore& store,
                                  const BackendInfo& backend) {
  ParameterReport r;
  r.frozen_student = backend.frozen_student_params;
  r.frozen_teacher = backend.frozen_teacher_params;
  for (const auto& p : store.items()) {
    const auto n = static_cast<std::int64_t>(p->value.numel());
    r.trainable += n;
    const std::string prefix = p->name.substr(0, p->name.find('.'));
    if (!r.groups.empty() && r.groups.back().first == prefix)
      r.groups.back().second += n;
    else
      r.groups.emplace_back(prefix, n);
  }
  const double total =
      static_cast<double>(r.trainable + r.frozen_student + r.frozen_teacher);
  r.trainable_fraction = total > 0 ? static_cast<double>(r.trainable) / total : 0.0;
  return r;
}

std::string format_parameter_report(const ParameterReport& r) {
  std::ostringstream os;
  os << "trainable parameters: " << r.trainable << "\n";
  for (const auto& [name, n] : r.groups)
    os << "  " << name << ": " << n << "\n";
  os << "frozen parameters: student " << r.frozen_student << ", teacher "
     << r.frozen_teacher << "\n";
  os << "trainable fraction: " << r.trainable_fraction * 100.0 << "%\n";
  return os.str();
}

}  // namespace histoseg::encoders
