#include "histoseg/distill/distill.hpp"

#include <algorithm>
#include <string>

#include "histoseg/core/error.hpp"

namespace histoseg::distill {

void validate(const DistillConfig& cfg) {
  if (cfg.layers.empty())
    core::fail(core::Error::Kind::argument, "distill.layers must be non-empty");
  for (int k : cfg.layers)
    if (k < 1 || k > 4)
      core::fail(core::Error::Kind::argument,
                 "distill.layers entries must be in 1..4, got " +
                     std::to_string(k));
  if (!(cfg.weight >= 0))
    core::fail(core::Error::Kind::argument, "distill.weight must be >= 0");
}

AffinityMatrix affinity(const data::TokenMatrix& tokens, int level) {
  if (!tokens.normalized)
    core::fail(core::Error::Kind::contract,
               "affinity requires l2-normalized tokens");
  const int n = tokens.m.dim(0);
  const int d = tokens.m.dim(1);
  AffinityMatrix a;
  a.level = level;
  a.matrix = core::Tensor::zeros({n, n});
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) acc += tokens.m(i, k) * tokens.m(j, k);
      a.matrix(i, j) = acc;
      a.matrix(j, i) = acc;
    }
  }
  return a;
}

core::Var struct_loss(core::Graph& g, const encoders::RefinedPyramid& refined,
                      const encoders::FeaturePyramid& teacher,
                      const DistillConfig& cfg) {
  validate(cfg);
  std::vector<core::Var> per_level;
  for (int k : cfg.layers) {
    const auto idx = static_cast<size_t>(k - 1);
    if (idx >= refined.levels.size() || k > teacher.level_count())
      core::fail(core::Error::Kind::shape,
                 "distill level " + std::to_string(k) + " not present");
    const auto [gh, gw] = refined.grids[idx];
    if (gh != teacher.levels[idx].dim(1) || gw != teacher.levels[idx].dim(2))
      core::fail(core::Error::Kind::shape,
                 "student/teacher grid mismatch at level " + std::to_string(k));
    data::TokenMatrix t_tok =
        data::l2_normalize(data::reshape_to_tokens(teacher.levels[idx]));
    const core::Tensor t_aff = affinity(t_tok, k).matrix;
    core::Var s_tok = core::l2norm_rows(
        g, core::chw_to_tokens(g, refined.levels[idx]), 1e-12);
    core::Var s_aff = core::matmul(g, s_tok, core::transpose2(g, s_tok));
    per_level.push_back(core::mse_vs(g, s_aff, t_aff));
  }
  return core::mean_scalars(g, per_level);
}

}  // namespace histoseg::distill
