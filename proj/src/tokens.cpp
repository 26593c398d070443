#include "histoseg/data/tokens.hpp"

#include <cmath>

#include "histoseg/core/error.hpp"

namespace histoseg::data {

using core::Error;
using core::fail;
using core::Tensor;

TokenMatrix reshape_to_tokens(const Tensor& chw) {
  if (chw.rank() != 3) fail(Error::Kind::shape, "reshape_to_tokens: want CHW");
  const int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  TokenMatrix t;
  t.grid_h = h;
  t.grid_w = w;
  t.m = Tensor::zeros({h * w, c});
  for (int ch = 0; ch < c; ++ch)
    for (int p = 0; p < h * w; ++p)
      t.m.data[static_cast<size_t>(p) * c + ch] = chw.data[static_cast<size_t>(ch) * h * w + p];
  return t;
}

Tensor tokens_to_chw(const TokenMatrix& tokens) {
  const int n = tokens.m.dim(0), c = tokens.m.dim(1);
  if (n != tokens.grid_h * tokens.grid_w)
    fail(Error::Kind::shape, "tokens_to_chw: grid does not match row count");
  Tensor out = Tensor::zeros({c, tokens.grid_h, tokens.grid_w});
  for (int ch = 0; ch < c; ++ch)
    for (int p = 0; p < n; ++p)
      out.data[static_cast<size_t>(ch) * n + p] = tokens.m.data[static_cast<size_t>(p) * c + ch];
  return out;
}

TokenMatrix l2_normalize(const TokenMatrix& tokens, double eps) {
  TokenMatrix out = tokens;
  const int n = tokens.m.dim(0), c = tokens.m.dim(1);
  for (int i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int j = 0; j < c; ++j) sq += tokens.m(i, j) * tokens.m(i, j);
    const double inv = 1.0 / (std::sqrt(sq) + eps);
    for (int j = 0; j < c; ++j) out.m(i, j) = tokens.m(i, j) * inv;
  }
  out.normalized = true;
  return out;
}

}  // namespace histoseg::data
