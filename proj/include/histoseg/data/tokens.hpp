#pragma once

#include "histoseg/core/tensor.hpp"

namespace histoseg::data {

// Feature-map tokens: one row per spatial position (row-major), one column per
// channel. `normalized` records whether rows are unit length; affinity
// construction requires it.
struct TokenMatrix {
  core::Tensor m;  // (grid_h * grid_w) x channels
  int grid_h = 0, grid_w = 0;
  bool normalized = false;
};

// (C,H,W) -> tokens. Bijective with tokens_to_chw.
TokenMatrix reshape_to_tokens(const core::Tensor& chw);
core::Tensor tokens_to_chw(const TokenMatrix& tokens);

// Row-wise l2 normalization; eps is added to the norm in the denominator, so
// zero rows stay zero.
TokenMatrix l2_normalize(const TokenMatrix& tokens, double eps = 1e-12);

}  // namespace histoseg::data
