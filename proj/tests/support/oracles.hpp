#pragma once

// Hand-written reference implementations used to freeze expected values in
// tests. Each is written from the defining formula, independent of the library
// code paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace testsupport {

// Binary cross-entropy on a single logit, direct from -[y ln s + (1-y) ln(1-s)]
// with s = sigmoid(z), evaluated in long double.
inline double bce_scalar_oracle(double z, double y) {
  const long double s = 1.0L / (1.0L + std::exp(static_cast<long double>(-z)));
  return static_cast<double>(-(static_cast<long double>(y) * std::log(s) +
                               (1.0L - static_cast<long double>(y)) * std::log(1.0L - s)));
}

inline double bce_mean_oracle(const std::vector<double>& z, const std::vector<double>& y) {
  double acc = 0.0;
  for (size_t i = 0; i < z.size(); ++i) acc += bce_scalar_oracle(z[i], y[i]);
  return acc / static_cast<double>(z.size());
}

// InfoNCE from the softmax definition: -log( e^{s+/T} / sum_k e^{s_k/T} ),
// where scores[0] is the positive.
inline double infonce_oracle(const std::vector<double>& scores, double temperature) {
  long double denom = 0.0L;
  for (double s : scores) denom += std::exp(static_cast<long double>(s / temperature));
  const long double num = std::exp(static_cast<long double>(scores[0] / temperature));
  return static_cast<double>(-std::log(num / denom));
}

// Bilinear interpolation at half-pixel centers, written pointwise from the
// sampling definition (no shared code with the library resizer).
inline double bilinear_sample_oracle(const std::vector<double>& img, int h, int w, double sy,
                                     double sx) {
  sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - y0, fx = sx - x0;
  const double a = img[static_cast<size_t>(y0) * w + x0];
  const double b = img[static_cast<size_t>(y0) * w + x1];
  const double c = img[static_cast<size_t>(y1) * w + x0];
  const double d = img[static_cast<size_t>(y1) * w + x1];
  return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx;
}

inline std::vector<double> bilinear_resize_oracle(const std::vector<double>& img, int h, int w,
                                                  int oh, int ow) {
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      const double sy = (oy + 0.5) * static_cast<double>(h) / oh - 0.5;
      const double sx = (ox + 0.5) * static_cast<double>(w) / ow - 0.5;
      out[static_cast<size_t>(oy) * ow + ox] = bilinear_sample_oracle(img, h, w, sy, sx);
    }
  return out;
}

// Pairwise token affinity by the naive double loop over dot products.
// tokens: n rows of dim d, row-major.
inline std::vector<double> affinity_oracle(const std::vector<double>& tokens, int n, int d) {
  std::vector<double> a(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k)
        acc += tokens[static_cast<size_t>(i) * d + k] * tokens[static_cast<size_t>(j) * d + k];
      a[static_cast<size_t>(i) * n + j] = acc;
    }
  return a;
}

// Set-counting IoU/Dice: intersections and unions gathered per class by
// explicit pixel enumeration, no confusion matrix involved.
struct SetCounts {
  int64_t inter = 0, pred = 0, gt = 0;
};

inline SetCounts set_counts_oracle(const std::vector<uint8_t>& pred,
                                   const std::vector<uint8_t>& gt, uint8_t cls) {
  SetCounts c;
  for (size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == cls, t = gt[i] == cls;
    c.inter += (p && t);
    c.pred += p;
    c.gt += t;
  }
  return c;
}

inline double iou_oracle(const SetCounts& c) {
  const int64_t uni = c.pred + c.gt - c.inter;
  return uni == 0 ? std::nan("") : static_cast<double>(c.inter) / static_cast<double>(uni);
}

inline double dice_oracle(const SetCounts& c) {
  const int64_t tot = c.pred + c.gt;
  return tot == 0 ? std::nan("") : 2.0 * static_cast<double>(c.inter) / static_cast<double>(tot);
}

}  // namespace testsupport
