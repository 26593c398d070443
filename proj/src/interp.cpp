#include "histoseg/core/interp.hpp"

#include <algorithm>
#include <cmath>

#include "histoseg/core/error.hpp"

namespace histoseg::core {

namespace {

struct Tap {
  int lo, hi;
  double w_hi;  // weight of the hi sample, lo gets 1 - w_hi
};

std::vector<Tap> make_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    int lo = static_cast<int>(std::floor(s));
    int hi = std::min(lo + 1, in - 1);
    taps[static_cast<size_t>(o)] = {lo, hi, s - lo};
  }
  return taps;
}

}  // namespace

void resize_bilinear_plane(const double* src, int h, int w, double* dst, int oh, int ow) {
  if (h <= 0 || w <= 0 || oh <= 0 || ow <= 0)
    fail(Error::Kind::shape, "resize_bilinear_plane: non-positive dimension");
  const auto ys = make_taps(h, oh);
  const auto xs = make_taps(w, ow);
  for (int oy = 0; oy < oh; ++oy) {
    const Tap& ty = ys[static_cast<size_t>(oy)];
    const double* row_lo = src + static_cast<size_t>(ty.lo) * w;
    const double* row_hi = src + static_cast<size_t>(ty.hi) * w;
    double* out_row = dst + static_cast<size_t>(oy) * ow;
    for (int ox = 0; ox < ow; ++ox) {
      const Tap& tx = xs[static_cast<size_t>(ox)];
      double top = row_lo[tx.lo] * (1.0 - tx.w_hi) + row_lo[tx.hi] * tx.w_hi;
      double bot = row_hi[tx.lo] * (1.0 - tx.w_hi) + row_hi[tx.hi] * tx.w_hi;
      out_row[ox] = top * (1.0 - ty.w_hi) + bot * ty.w_hi;
    }
  }
}

Tensor resize_bilinear_chw(const Tensor& src, int oh, int ow) {
  if (src.rank() != 3) fail(Error::Kind::shape, "resize_bilinear_chw: want CHW, got " + shape_str(src.shape));
  const int c = src.dim(0), h = src.dim(1), w = src.dim(2);
  Tensor out = Tensor::zeros({c, oh, ow});
  for (int ch = 0; ch < c; ++ch) {
    resize_bilinear_plane(src.data.data() + static_cast<size_t>(ch) * h * w, h, w,
                          out.data.data() + static_cast<size_t>(ch) * oh * ow, oh, ow);
  }
  return out;
}

std::vector<uint8_t> resize_nearest_labels(const std::vector<uint8_t>& src, int h, int w, int oh,
                                           int ow) {
  if (static_cast<int64_t>(src.size()) != static_cast<int64_t>(h) * w)
    fail(Error::Kind::shape, "resize_nearest_labels: size mismatch");
  std::vector<uint8_t> out(static_cast<size_t>(oh) * ow);
  for (int oy = 0; oy < oh; ++oy) {
    int sy = std::min(static_cast<int>((oy + 0.5) * h / oh), h - 1);
    for (int ox = 0; ox < ow; ++ox) {
      int sx = std::min(static_cast<int>((ox + 0.5) * w / ow), w - 1);
      out[static_cast<size_t>(oy) * ow + ox] = src[static_cast<size_t>(sy) * w + sx];
    }
  }
  return out;
}

}  // namespace histoseg::core
