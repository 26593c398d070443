#pragma once

#include <string>
#include <vector>

#include "histoseg/data/image.hpp"
#include "histoseg/pipeline/model.hpp"

namespace histoseg::pipeline {

// Writes, for one image: a heatmap PNG per foreground class, the prediction
// overlay (class tint over the input; background pixels untouched), and the
// per-stage mean-activation maps. Returns the written paths. File names are
// <stem>_cam_<CLASS>.png, <stem>_overlay.png, <stem>_stage<k>.png.
std::vector<std::string> visualize(const Model& model, const data::RGBImage& image,
                                   const std::string& out_dir, const std::string& stem);

}  // namespace histoseg::pipeline
