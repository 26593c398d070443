#pragma once

#include <vector>

#include "histoseg/core/autograd.hpp"
#include "histoseg/data/tokens.hpp"
#include "histoseg/encoders/adapters.hpp"
#include "histoseg/encoders/backend.hpp"

namespace histoseg::distill {

// Token-to-token cosine similarities of one pyramid level.
struct AffinityMatrix {
  core::Tensor matrix;  // N x N
  int level = 0;
};

struct DistillConfig {
  std::vector<int> layers{2};  // 1-based pyramid levels carrying the loss
  double weight = 1.5;
};

void validate(const DistillConfig& cfg);

// A = tokens * tokens^T. Requires unit-norm rows (contract error otherwise);
// the result is symmetric with unit diagonal, entries in [-1, 1].
AffinityMatrix affinity(const data::TokenMatrix& tokens, int level = 0);

// Mean over the configured levels of the elementwise MSE between student and
// teacher affinities. Student affinities are built inside the graph so the
// loss reaches the adapters; teacher levels are plain frozen tensors.
core::Var struct_loss(core::Graph& g, const encoders::RefinedPyramid& refined,
                      const encoders::FeaturePyramid& teacher,
                      const DistillConfig& cfg);

}  // namespace histoseg::distill
