#include "histoseg/encoders/toy_backend.hpp"

#include <algorithm>
#include <cmath>

#include "histoseg/core/error.hpp"

namespace histoseg::encoders {

namespace {

constexpr double kConceptSigma = 0.22;  // width of the color->concept softmax
constexpr double kTextTemp = 0.45;      // sharpness of prompt->concept mixtures
constexpr double kAuxScale = 0.25;      // damping of the non-semantic level-4 half
// Chosen so the four default class descriptions map to four distinct,
// strongly peaked concept anchors (verified by test).
constexpr std::uint64_t kPromptSalt = 0x2982ccc13327e297ull;
constexpr int kDesc = 12;  // 8 concept + 3 rgb + 1 gradient

core::Tensor random_matrix(int rows, int cols, std::uint64_t seed, double scale) {
  core::Rng rng(seed);
  core::Tensor m = core::Tensor::zeros({rows, cols});
  for (double& v : m.data) v = rng.normal() * scale;
  return m;
}

// y = tanh(W d) for one grid cell, appended into out at (., gy, gx).
void project_tanh(const core::Tensor& w, const double* d, core::Tensor& out,
                  int gy, int gx) {
  const int rows = w.dim(0);
  const int cols = w.dim(1);
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += w.data[r * cols + c] * d[c];
    out(r, gy, gx) = std::tanh(acc);
  }
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return core::Rng(a ^ (b * 0x9e3779b97f4a7c15ull)).next_u64();
}

}  // namespace

const std::array<std::array<double, 3>, 8>&
ToyVisionLanguageBackend::anchor_colors() {
  // Anchor 0 approximates unstained background; 1..7 are well separated hues.
  static const std::array<std::array<double, 3>, 8> anchors = {{
      {0.94, 0.90, 0.93},  // pale background
      {0.45, 0.20, 0.55},  // purple
      {0.85, 0.35, 0.50},  // pink
      {0.25, 0.35, 0.75},  // blue
      {0.55, 0.40, 0.20},  // brown
      {0.30, 0.65, 0.35},  // green
      {0.90, 0.60, 0.25},  // orange
      {0.20, 0.65, 0.65},  // teal
  }};
  return anchors;
}

std::array<double, 8> ToyVisionLanguageBackend::pixel_concept(double r, double g,
                                                              double b) {
  const auto& anchors = anchor_colors();
  std::array<double, 8> logits{};
  for (int i = 0; i < 8; ++i) {
    const double dr = r - anchors[i][0];
    const double dg = g - anchors[i][1];
    const double db = b - anchors[i][2];
    logits[i] = -(dr * dr + dg * dg + db * db) / (2.0 * kConceptSigma * kConceptSigma);
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  std::array<double, 8> q{};
  for (int i = 0; i < 8; ++i) {
    q[i] = std::exp(logits[i] - m);
    z += q[i];
  }
  for (double& v : q) v /= z;
  return q;
}

ToyVisionLanguageBackend::ToyVisionLanguageBackend(std::uint64_t seed, ToyDims dims,
                                                   std::string degraded_from)
    : dims_(dims), seed_(seed) {
  if (dims_.text_dim <= 0 || dims_.student_channels <= dims_.text_dim)
    core::fail(core::Error::Kind::argument,
               "toy backend needs student_channels > text_dim > 0");
  const double s12 = 1.0 / std::sqrt(static_cast<double>(kDesc));
  for (int k = 0; k < 3; ++k)
    w_level_[k] = random_matrix(dims_.student_channels, kDesc,
                                mix(seed, 0x11 + k), s12);
  w_aux_ = random_matrix(dims_.student_channels - dims_.text_dim, kDesc,
                         mix(seed, 0x21), s12);
  w_txt_ = random_matrix(dims_.text_dim, 8, mix(seed, 0x31), 1.0 / std::sqrt(8.0));
  for (int k = 0; k < 4; ++k)
    v_level_[k] = random_matrix(dims_.teacher_channels[k], kDesc,
                                mix(seed, 0x41 + k), s12);

  info_.name = "toy";
  info_.degraded_from = std::move(degraded_from);
  info_.student_channels = dims_.student_channels;
  info_.text_dim = dims_.text_dim;
  info_.teacher_channels = dims_.teacher_channels;
  auto count = [](const core::Tensor& t) {
    return static_cast<std::int64_t>(t.numel());
  };
  info_.frozen_student_params =
      count(w_level_[0]) + count(w_level_[1]) + count(w_level_[2]) +
      count(w_aux_) + count(w_txt_);
  info_.frozen_teacher_params = 0;
  for (const auto& v : v_level_) info_.frozen_teacher_params += count(v);
}

core::Tensor ToyVisionLanguageBackend::descriptor_field(
    const data::RGBImage& img) const {
  if (img.h <= 0 || img.w <= 0)
    core::fail(core::Error::Kind::argument, "empty image");
  core::Tensor d = core::Tensor::zeros({kDesc, img.h, img.w});
  // Luma first so the gradient channel can read neighbors.
  std::vector<double> luma(static_cast<size_t>(img.h) * img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const double r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
      luma[static_cast<size_t>(y) * img.w + x] = (r + g + b) / 3.0;
      const auto q = pixel_concept(r, g, b);
      for (int i = 0; i < 8; ++i) d(i, y, x) = q[i];
      d(8, y, x) = r;
      d(9, y, x) = g;
      d(10, y, x) = b;
    }
  auto lum = [&](int y, int x) {
    y = std::clamp(y, 0, img.h - 1);
    x = std::clamp(x, 0, img.w - 1);
    return luma[static_cast<size_t>(y) * img.w + x];
  };
  // Central differences with clamped borders; symmetric, so a horizontal flip
  // of the image flips this channel exactly.
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      d(11, y, x) = std::abs(lum(y, x + 1) - lum(y, x - 1)) / 2.0 +
                    std::abs(lum(y + 1, x) - lum(y - 1, x)) / 2.0;
  return d;
}

namespace {

// Block-mean pool a CHW field to ceil(h/stride) x ceil(w/stride).
core::Tensor block_pool(const core::Tensor& d, int stride) {
  const int c = d.dim(0), h = d.dim(1), w = d.dim(2);
  const int gh = (h + stride - 1) / stride;
  const int gw = (w + stride - 1) / stride;
  core::Tensor out = core::Tensor::zeros({c, gh, gw});
  for (int ch = 0; ch < c; ++ch)
    for (int by = 0; by < gh; ++by)
      for (int bx = 0; bx < gw; ++bx) {
        const int y0 = by * stride, y1 = std::min(h, y0 + stride);
        const int x0 = bx * stride, x1 = std::min(w, x0 + stride);
        double acc = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) acc += d(ch, y, x);
        out(ch, by, bx) = acc / ((y1 - y0) * (x1 - x0));
      }
  return out;
}

}  // namespace

FeaturePyramid ToyVisionLanguageBackend::student_pyramid(
    const data::RGBImage& img) const {
  const core::Tensor d = descriptor_field(img);
  FeaturePyramid p;
  p.role = "student";
  for (int k = 0; k < 4; ++k) {
    const core::Tensor pooled = block_pool(d, 4 << k);
    const int gh = pooled.dim(1), gw = pooled.dim(2);
    core::Tensor f = core::Tensor::zeros({dims_.student_channels, gh, gw});
    std::vector<double> cell(kDesc);
    for (int gy = 0; gy < gh; ++gy)
      for (int gx = 0; gx < gw; ++gx) {
        for (int i = 0; i < kDesc; ++i) cell[i] = pooled(i, gy, gx);
        if (k < 3) {
          project_tanh(w_level_[k], cell.data(), f, gy, gx);
        } else {
          // Level 4 splits into a semantic half living in the text space and
          // a damped generic half; prototype scoring rides on the first half.
          for (int r = 0; r < dims_.text_dim; ++r) {
            double acc = 0.0;
            for (int c = 0; c < 8; ++c) acc += w_txt_.data[r * 8 + c] * cell[c];
            f(r, gy, gx) = acc;
          }
          const int aux = dims_.student_channels - dims_.text_dim;
          for (int r = 0; r < aux; ++r) {
            double acc = 0.0;
            for (int c = 0; c < kDesc; ++c)
              acc += w_aux_.data[r * kDesc + c] * cell[c];
            f(dims_.text_dim + r, gy, gx) = kAuxScale * std::tanh(acc);
          }
        }
      }
    p.levels.push_back(std::move(f));
  }
  return p;
}

FeaturePyramid ToyVisionLanguageBackend::teacher_pyramid(
    const data::RGBImage& img) const {
  const core::Tensor d = descriptor_field(img);
  FeaturePyramid p;
  p.role = "teacher";
  for (int k = 0; k < 4; ++k) {
    const core::Tensor pooled = block_pool(d, 4 << k);
    const int gh = pooled.dim(1), gw = pooled.dim(2);
    core::Tensor f = core::Tensor::zeros({dims_.teacher_channels[k], gh, gw});
    std::vector<double> cell(kDesc);
    for (int gy = 0; gy < gh; ++gy)
      for (int gx = 0; gx < gw; ++gx) {
        for (int i = 0; i < kDesc; ++i) cell[i] = pooled(i, gy, gx);
        project_tanh(v_level_[k], cell.data(), f, gy, gx);
      }
    p.levels.push_back(std::move(f));
  }
  return p;
}

std::array<double, 8> ToyVisionLanguageBackend::prompt_concept(
    const std::string& prompt) {
  if (prompt.empty())
    core::fail(core::Error::Kind::argument, "prompt must not be empty");
  core::Rng rng(core::fnv1a64(prompt) ^ kPromptSalt);
  // Background anchor 0 is never a prompt target, only anchors 1..7 compete.
  std::array<double, 8> logits{};
  logits[0] = -1e30;
  for (int i = 1; i < 8; ++i) logits[i] = rng.normal();
  const double m = *std::max_element(logits.begin(), logits.end());
  std::array<double, 8> u{};
  double z = 0.0;
  for (int i = 0; i < 8; ++i) {
    u[i] = std::exp((logits[i] - m) / kTextTemp);
    z += u[i];
  }
  for (double& v : u) v /= z;
  u[0] = 0.0;
  return u;
}

core::Tensor ToyVisionLanguageBackend::encode_text(const std::string& prompt) const {
  const auto u = prompt_concept(prompt);
  core::Tensor t = core::Tensor::zeros({dims_.text_dim});
  for (int r = 0; r < dims_.text_dim; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) acc += w_txt_.data[r * 8 + c] * u[c];
    t.data[r] = acc;
  }
  double n = 0.0;
  for (double v : t.data) n += v * v;
  n = std::sqrt(n);
  if (n < 1e-12)
    core::fail(core::Error::Kind::contract, "degenerate text embedding");
  for (double& v : t.data) v /= n;
  return t;
}

core::Tensor ToyVisionLanguageBackend::encode_image_global(
    const data::RGBImage& img) const {
  if (img.h <= 0 || img.w <= 0)
    core::fail(core::Error::Kind::argument, "empty image");
  std::array<double, 8> qbar{};
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const auto q = pixel_concept(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
      for (int i = 0; i < 8; ++i) qbar[i] += q[i];
    }
  for (double& v : qbar) v /= static_cast<double>(img.h) * img.w;
  core::Tensor e = core::Tensor::zeros({dims_.text_dim});
  for (int r = 0; r < dims_.text_dim; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) acc += w_txt_.data[r * 8 + c] * qbar[c];
    e.data[r] = acc;
  }
  double n = 0.0;
  for (double v : e.data) n += v * v;
  n = std::sqrt(n);
  if (n < 1e-12)
    core::fail(core::Error::Kind::contract, "degenerate image embedding");
  for (double& v : e.data) v /= n;
  return e;
}

}  // namespace histoseg::encoders
