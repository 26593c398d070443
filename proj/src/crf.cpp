#include <algorithm>
#include <cmath>
#include <vector>

#include "histoseg/core/error.hpp"
#include "histoseg/postprocess/postprocess.hpp"

namespace histoseg::postprocess {

namespace {

constexpr int kColorNodes = 8192;
constexpr double kColorDistMax = 3.0 * 255.0 * 255.0;

// Truncated separable Gaussian blur over the lattice, window radius r per
// axis, edges clipped. Includes the center tap (weight 1).
void blur_separable(const std::vector<double>& src, std::vector<double>& tmp,
                    std::vector<double>& dst, int h, int w, int r,
                    const std::vector<double>& lut1d) {
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + static_cast<size_t>(y) * w;
    double* out = tmp.data() + static_cast<size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      int d0 = std::max(-r, -x), d1 = std::min(r, w - 1 - x);
      for (int d = d0; d <= d1; ++d) acc += lut1d[static_cast<size_t>(std::abs(d))] * row[x + d];
      out[x] = acc;
    }
  }
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      double acc = 0.0;
      int d0 = std::max(-r, -y), d1 = std::min(r, h - 1 - y);
      for (int d = d0; d <= d1; ++d)
        acc += lut1d[static_cast<size_t>(std::abs(d))] * tmp[static_cast<size_t>(y + d) * w + x];
      dst[static_cast<size_t>(y) * w + x] = acc;
    }
  }
}

struct ColorLut {
  std::vector<double> nodes;
  double inv_step = 0.0;

  explicit ColorLut(double sg) : nodes(kColorNodes) {
    const double step = kColorDistMax / (kColorNodes - 1);
    inv_step = 1.0 / step;
    for (int i = 0; i < kColorNodes; ++i)
      nodes[static_cast<size_t>(i)] = std::exp(-(i * step) / (2.0 * sg * sg));
  }

  double operator()(double dist2) const {
    double u = dist2 * inv_step;
    int b = static_cast<int>(u);
    if (b >= kColorNodes - 1) return nodes[kColorNodes - 1];
    double f = u - b;
    double lo = nodes[static_cast<size_t>(b)];
    return lo + f * (nodes[static_cast<size_t>(b) + 1] - lo);
  }
};

}  // namespace

void validate(const CrfParams& p) {
  if (p.w1 < 0.0 || p.w2 < 0.0)
    core::fail(core::Error::Kind::argument, "CrfParams: kernel weights must be >= 0");
  if (p.sa <= 0.0 || p.sb <= 0.0 || p.sg <= 0.0)
    core::fail(core::Error::Kind::argument, "CrfParams: kernel sigmas must be > 0");
  if (p.iterations < 1)
    core::fail(core::Error::Kind::argument, "CrfParams: iterations must be >= 1");
}

CrfProblem make_crf_problem(const core::Tensor& probs,
                            const data::RGBImage& image, const CrfParams& p) {
  validate(p);
  if (probs.rank() != 3)
    core::fail(core::Error::Kind::shape,
               "make_crf_problem: expected (L, H, W), got " + core::shape_str(probs.shape));
  const int l = probs.dim(0), h = probs.dim(1), w = probs.dim(2);
  if (image.h != h || image.w != w)
    core::fail(core::Error::Kind::shape, "make_crf_problem: image and probability dims differ");

  CrfProblem out;
  out.params = p;
  out.unary = core::Tensor::zeros({l, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int k = 0; k < l; ++k) sum += probs(k, y, x);
      if (std::abs(sum - 1.0) > 1e-4)
        core::fail(core::Error::Kind::contract,
                   "make_crf_problem: per-pixel probabilities must sum to 1");
      double floored = 0.0;
      for (int k = 0; k < l; ++k) floored += std::max(probs(k, y, x), 1e-8);
      for (int k = 0; k < l; ++k)
        out.unary(k, y, x) = -std::log(std::max(probs(k, y, x), 1e-8) / floored);
    }
  }
  out.intensities = core::Tensor::zeros({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.intensities(c, y, x) = image.at(y, x, c) * 255.0;
  return out;
}

core::Tensor crf_inference(const CrfProblem& problem) {
  validate(problem.params);
  const core::Tensor& unary = problem.unary;
  if (unary.rank() != 3 || unary.dim(0) < 1)
    core::fail(core::Error::Kind::shape,
               "crf_inference: unary must be (L, H, W), got " + core::shape_str(unary.shape));
  const int labels = unary.dim(0), h = unary.dim(1), w = unary.dim(2);
  if (problem.intensities.shape != core::Shape{3, h, w})
    core::fail(core::Error::Kind::shape, "crf_inference: intensities must be (3, H, W)");
  const size_t n = static_cast<size_t>(h) * w;
  const CrfParams& p = problem.params;

  // Q0 from the unary, which must encode a proper distribution.
  std::vector<double> q(static_cast<size_t>(labels) * n);
  for (size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int l = 0; l < labels; ++l) {
      double v = std::exp(-unary.data[static_cast<size_t>(l) * n + i]);
      q[static_cast<size_t>(l) * n + i] = v;
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-4)
      core::fail(core::Error::Kind::contract,
                 "crf_inference: exp(-unary) must sum to 1 per pixel");
    for (int l = 0; l < labels; ++l) q[static_cast<size_t>(l) * n + i] /= sum;
  }

  const int rs = static_cast<int>(std::ceil(3.0 * p.sa));
  const int ra = static_cast<int>(std::ceil(3.0 * p.sb));

  std::vector<double> smooth1d(static_cast<size_t>(rs) + 1);
  for (int d = 0; d <= rs; ++d)
    smooth1d[static_cast<size_t>(d)] = std::exp(-(static_cast<double>(d) * d) / (2.0 * p.sa * p.sa));
  std::vector<double> app1d(static_cast<size_t>(ra) + 1);
  for (int d = 0; d <= ra; ++d)
    app1d[static_cast<size_t>(d)] = std::exp(-(static_cast<double>(d) * d) / (2.0 * p.sb * p.sb));
  const ColorLut color(p.sg);

  const double* ir = problem.intensities.data.data();
  const double* ig = ir + n;
  const double* ib = ig + n;

  // Label-independent kernel mass around each pixel, self excluded.
  std::vector<double> w_smooth(n), tmp(n), ones(n, 1.0);
  blur_separable(ones, tmp, w_smooth, h, w, rs, smooth1d);
  for (auto& v : w_smooth) v -= 1.0;

  std::vector<double> w_app(n, 0.0);
  for (int dy = 0; dy <= ra; ++dy) {
    for (int dx = (dy == 0 ? 1 : -ra); dx <= ra; ++dx) {
      const double spatial = app1d[static_cast<size_t>(dy)] * app1d[static_cast<size_t>(std::abs(dx))];
      const int y0 = 0, y1 = h - dy;
      const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
      for (int y = y0; y < y1; ++y) {
        const size_t base_i = static_cast<size_t>(y) * w;
        const size_t base_j = static_cast<size_t>(y + dy) * w + dx;
        for (int x = x0; x < x1; ++x) {
          const size_t i = base_i + x, j = base_j + x;
          const double dr = ir[i] - ir[j], dg = ig[i] - ig[j], db = ib[i] - ib[j];
          const double k = spatial * color(dr * dr + dg * dg + db * db);
          w_app[i] += k;
          w_app[j] += k;
        }
      }
    }
  }

  std::vector<double> s_smooth(static_cast<size_t>(labels) * n);
  std::vector<double> s_app(static_cast<size_t>(labels) * n);
  std::vector<double> plane(n), blurred(n);
  std::vector<double> next(static_cast<size_t>(labels) * n);

  for (int it = 0; it < p.iterations; ++it) {
    for (int l = 0; l < labels; ++l) {
      std::copy(q.begin() + static_cast<long>(l) * static_cast<long>(n),
                q.begin() + static_cast<long>(l + 1) * static_cast<long>(n), plane.begin());
      blur_separable(plane, tmp, blurred, h, w, rs, smooth1d);
      std::copy(blurred.begin(), blurred.end(), s_smooth.begin() + static_cast<long>(l) * static_cast<long>(n));
    }

    std::fill(s_app.begin(), s_app.end(), 0.0);
    for (int dy = 0; dy <= ra; ++dy) {
      for (int dx = (dy == 0 ? 1 : -ra); dx <= ra; ++dx) {
        const double spatial = app1d[static_cast<size_t>(dy)] * app1d[static_cast<size_t>(std::abs(dx))];
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h - dy; ++y) {
          const size_t base_i = static_cast<size_t>(y) * w;
          const size_t base_j = static_cast<size_t>(y + dy) * w + dx;
          for (int x = x0; x < x1; ++x) {
            const size_t i = base_i + x, j = base_j + x;
            const double dr = ir[i] - ir[j], dg = ig[i] - ig[j], db = ib[i] - ib[j];
            const double k = spatial * color(dr * dr + dg * dg + db * db);
            for (int l = 0; l < labels; ++l) {
              const size_t off = static_cast<size_t>(l) * n;
              s_app[off + i] += k * q[off + j];
              s_app[off + j] += k * q[off + i];
            }
          }
        }
      }
    }

    // message(i,l) = sum_{j != i} K_ij (1 - Q_j(l)); the smoothness sums
    // include the center tap, corrected with the pixel's own Q.
    for (size_t i = 0; i < n; ++i) {
      double mx = -1e300;
      for (int l = 0; l < labels; ++l) {
        const size_t off = static_cast<size_t>(l) * n;
        const double msg = p.w1 * (w_smooth[i] - (s_smooth[off + i] - q[off + i])) +
                           p.w2 * (w_app[i] - s_app[off + i]);
        const double e = -unary.data[off + i] - msg;
        next[off + i] = e;
        if (e > mx) mx = e;
      }
      double sum = 0.0;
      for (int l = 0; l < labels; ++l) {
        const size_t off = static_cast<size_t>(l) * n;
        next[off + i] = std::exp(next[off + i] - mx);
        sum += next[off + i];
      }
      for (int l = 0; l < labels; ++l) next[static_cast<size_t>(l) * n + i] /= sum;
    }
    std::swap(q, next);
  }

  core::Tensor out = core::Tensor::zeros({labels, h, w});
  out.data = std::move(q);
  return out;
}

data::SegmentationMask dense_crf(const CrfProblem& problem) {
  return argmax_mask(crf_inference(problem));
}

}  // namespace histoseg::postprocess
