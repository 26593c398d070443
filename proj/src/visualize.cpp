#include "histoseg/pipeline/visualize.hpp"

#include <array>

#include "histoseg/core/interp.hpp"
#include "histoseg/data/classes.hpp"

namespace histoseg::pipeline {

namespace {

// Fixed overlay palette, one entry per foreground class.
constexpr std::array<std::array<double, 3>, data::kNumClasses> kClassTint = {{
    {0.90, 0.15, 0.15},  // TUM
    {0.95, 0.80, 0.20},  // STR
    {0.20, 0.45, 0.90},  // LYM
    {0.60, 0.20, 0.70},  // NEC
}};

// Cold-to-hot ramp for scalar maps.
void heat_color(double v, double& r, double& g, double& b) {
  r = v;
  g = 0.25 * v;
  b = 1.0 - v;
}

}  // namespace

std::vector<std::string> visualize(const Model& model, const data::RGBImage& image,
                                   const std::string& out_dir, const std::string& stem) {
  std::vector<std::string> written;
  Prediction pred = predict(model, image);

  for (int c = 0; c < data::kNumClasses; ++c) {
    data::RGBImage heat = data::RGBImage::filled(image.h, image.w, 0, 0, 0);
    for (int y = 0; y < image.h; ++y)
      for (int x = 0; x < image.w; ++x) {
        double r, g, b;
        heat_color(pred.norm_cams(c, y, x), r, g, b);
        heat.at(y, x, 0) = r;
        heat.at(y, x, 1) = g;
        heat.at(y, x, 2) = b;
      }
    std::string path = out_dir + "/" + stem + "_cam_" + data::class_name(c) + ".png";
    data::save_image(path, heat);
    written.push_back(path);
  }

  data::RGBImage overlay = image;
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x) {
      int label = pred.mask.at(y, x);
      if (label >= data::kNumClasses) continue;  // background keeps the input pixel
      const auto& tint = kClassTint[static_cast<size_t>(label)];
      for (int ch = 0; ch < 3; ++ch)
        overlay.at(y, x, ch) = 0.5 * overlay.at(y, x, ch) + 0.5 * tint[static_cast<size_t>(ch)];
    }
  std::string overlay_path = out_dir + "/" + stem + "_overlay.png";
  data::save_image(overlay_path, overlay);
  written.push_back(overlay_path);

  std::vector<core::Tensor> stages = stage_activation_maps(model, image);
  for (size_t k = 0; k < stages.size(); ++k) {
    const core::Tensor& m = stages[k];
    core::Tensor full2d = core::Tensor::zeros({1, m.dim(0), m.dim(1)});
    std::copy(m.data.begin(), m.data.end(), full2d.data.begin());
    core::Tensor up = core::resize_bilinear_chw(full2d, image.h, image.w);
    data::RGBImage gray = data::RGBImage::filled(image.h, image.w, 0, 0, 0);
    for (int y = 0; y < image.h; ++y)
      for (int x = 0; x < image.w; ++x) {
        double v = up(0, y, x);
        gray.at(y, x, 0) = v;
        gray.at(y, x, 1) = v;
        gray.at(y, x, 2) = v;
      }
    std::string path = out_dir + "/" + stem + "_stage" + std::to_string(k + 1) + ".png";
    data::save_image(path, gray);
    written.push_back(path);
  }
  return written;
}

}  // namespace histoseg::pipeline
