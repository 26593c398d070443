#include "histoseg/postprocess/postprocess.hpp"

#include <cmath>

#include "histoseg/core/error.hpp"

namespace histoseg::postprocess {

namespace {

core::Tensor hflip_chw(const core::Tensor& t) {
  core::Tensor out = core::Tensor::zeros(t.shape);
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out(k, y, x) = t(k, y, w - 1 - x);
  return out;
}

}  // namespace

core::Tensor tta_cams(
    const std::function<core::Tensor(const data::RGBImage&)>& forward,
    const data::RGBImage& image, const TtaConfig& cfg) {
  if (!forward) core::fail(core::Error::Kind::argument, "tta_cams: null forward callback");
  if (!cfg.enabled) return forward(image);

  static const double kScales[] = {0.9, 1.0, 1.1};
  core::Tensor acc;
  int count = 0;
  for (int flip = 0; flip < 2; ++flip) {
    data::RGBImage base = flip ? data::hflip(image) : image;
    for (double s : kScales) {
      core::Tensor cams = forward(data::adjust_brightness(base, s));
      if (cams.rank() != 3)
        core::fail(core::Error::Kind::shape,
                   "tta_cams: forward must return (C, gh, gw), got " + core::shape_str(cams.shape));
      if (flip) cams = hflip_chw(cams);
      if (acc.empty()) {
        acc = cams;
      } else {
        if (!acc.same_shape(cams))
          core::fail(core::Error::Kind::shape, "tta_cams: augmented forward changed output shape");
        for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += cams.data[i];
      }
      ++count;
    }
  }
  for (auto& v : acc.data) v /= count;
  return acc;
}

double background_probability(double max_activation, double exponent) {
  return std::pow(1.0 - max_activation, exponent);
}

core::Tensor assemble_probabilities(const core::Tensor& norm_cams,
                                    const PostprocessConfig& cfg) {
  if (norm_cams.rank() != 3)
    core::fail(core::Error::Kind::shape,
               "assemble_probabilities: expected (C, H, W), got " + core::shape_str(norm_cams.shape));
  if (cfg.bg_exponent <= 0.0)
    core::fail(core::Error::Kind::argument, "assemble_probabilities: bg_exponent must be > 0");
  const int c = norm_cams.dim(0), h = norm_cams.dim(1), w = norm_cams.dim(2);
  core::Tensor out = core::Tensor::zeros({c + 1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double mx = 0.0;
      for (int k = 0; k < c; ++k) {
        double v = norm_cams(k, y, x);
        if (v < -1e-9 || v > 1.0 + 1e-9)
          core::fail(core::Error::Kind::contract,
                     "assemble_probabilities: map values must lie in [0,1]");
        out(k, y, x) = v;
        if (v > mx) mx = v;
      }
      double bg = background_probability(mx, cfg.bg_exponent);
      out(c, y, x) = bg;
      double sum = bg;
      for (int k = 0; k < c; ++k) sum += out(k, y, x);
      for (int k = 0; k <= c; ++k) out(k, y, x) /= sum;
    }
  }
  return out;
}

data::SegmentationMask argmax_mask(const core::Tensor& probs) {
  if (probs.rank() != 3)
    core::fail(core::Error::Kind::shape,
               "argmax_mask: expected (L, H, W), got " + core::shape_str(probs.shape));
  const int l = probs.dim(0), h = probs.dim(1), w = probs.dim(2);
  data::SegmentationMask mask;
  mask.h = h;
  mask.w = w;
  mask.labels.assign(static_cast<size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = 0;
      double bv = probs(0, y, x);
      for (int k = 1; k < l; ++k) {
        double v = probs(k, y, x);
        if (v > bv) {
          bv = v;
          best = k;
        }
      }
      mask.at(y, x) = static_cast<uint8_t>(best);
    }
  }
  return mask;
}

}  // namespace histoseg::postprocess
