#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "histoseg/core/autograd.hpp"
#include "histoseg/core/rng.hpp"
#include "histoseg/encoders/backend.hpp"

namespace histoseg::encoders {

struct AdapterConfig {
  int channels = 64;  // frozen student channel width, in == out
  int hidden = 32;    // bottleneck width
  int levels = 4;
  double norm_eps = 1e-5;
};

// Bottleneck width rule shared by every assembly path: wide towers cap at
// 512, small ones halve.
inline int default_adapter_hidden(int channels) {
  return channels >= 512 ? 512 : (channels / 2 < 8 ? 8 : channels / 2);
}

// Trainable bottleneck adapters, one per pyramid level:
//   x + conv1x1_out(gelu(norm(dwconv3x3(gelu(norm(conv1x1_in(x)))))))
// The closing 1x1 starts at zero, so a fresh stack is an exact identity and
// training only gradually departs from the frozen features.
class AdapterStack {
 public:
  AdapterStack(core::ParamStore& store, AdapterConfig cfg, core::Rng& rng);

  // level is 1-based to match the pyramid naming; x is (channels, h, w).
  core::Var apply(core::Graph& g, int level, core::Var x) const;

  const AdapterConfig& config() const { return cfg_; }

 private:
  struct LevelParams {
    core::Param* pre_w;
    core::Param* pre_b;
    core::Param* pre_gamma;
    core::Param* pre_beta;
    core::Param* dw_w;
    core::Param* dw_b;
    core::Param* dw_gamma;
    core::Param* dw_beta;
    core::Param* post_w;
    core::Param* post_b;
  };
  AdapterConfig cfg_;
  std::vector<LevelParams> levels_;
};

// Student features aligned to guidance grids and passed through the adapters.
struct RefinedPyramid {
  std::vector<core::Var> levels;  // (channels, gh, gw) each
  std::vector<std::pair<int, int>> grids;
};

std::vector<std::pair<int, int>> pyramid_grids(const FeaturePyramid& p);

// Bilinearly resizes each student level to the matching guidance grid, then
// applies that level's adapter. Differentiable w.r.t. adapter parameters.
RefinedPyramid adapt(core::Graph& g, const FeaturePyramid& student,
                     const std::vector<std::pair<int, int>>& guidance_grids,
                     const AdapterStack& adapters);

struct ParameterReport {
  std::int64_t trainable = 0;
  std::int64_t frozen_student = 0;
  std::int64_t frozen_teacher = 0;
  double trainable_fraction = 0.0;  // trainable / (trainable + frozen)
  std::vector<std::pair<std::string, std::int64_t>> groups;  // by name prefix
};

ParameterReport report_parameters(const core::ParamStore& store,
                                  const BackendInfo& backend);

std::string format_parameter_report(const ParameterReport& r);

}  // namespace histoseg::encoders
