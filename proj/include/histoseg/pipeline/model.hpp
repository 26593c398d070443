#pragma once

#include <memory>
#include <string>
#include <vector>

#include "histoseg/core/autograd.hpp"
#include "histoseg/data/image.hpp"
#include "histoseg/encoders/adapters.hpp"
#include "histoseg/encoders/backend.hpp"
#include "histoseg/pipeline/config.hpp"
#include "histoseg/protocam/prototypes.hpp"
#include "histoseg/refine/refine.hpp"

namespace histoseg::pipeline {

// Everything a run owns: the frozen backend, the parameter store holding all
// trainables (adapters, prototype MLPs, temperature, background prototype),
// and the contrastive memory bank. Movable, not copyable.
struct Model {
  RunConfig cfg;
  std::vector<std::string> prompts;
  std::unique_ptr<encoders::EncoderBackend> backend;
  core::ParamStore store;
  std::unique_ptr<encoders::AdapterStack> adapters;
  std::unique_ptr<protocam::PrototypeBank> prototypes;
  std::unique_ptr<protocam::CamHead> head;
  refine::MemoryBank bank;
};

Model build_model(const RunConfig& cfg, const std::vector<std::string>& prompts);

// Frozen-tower pass plus adapters and prototype maps, no gradients kept.
// Returns the raw (C, gh, gw) class maps at the level-4 grid.
core::Tensor raw_cams(const Model& model, const data::RGBImage& image);

// Mean absolute activation per refined pyramid level, min-max normalized to
// [0,1]; the stage-by-stage view of what the adapters pass through.
std::vector<core::Tensor> stage_activation_maps(const Model& model,
                                                const data::RGBImage& image);

struct Prediction {
  data::SegmentationMask mask;
  core::Tensor probabilities;  // (C+1, H, W); background last
  core::Tensor norm_cams;      // (C, H, W), normalized maps at image size
};

// Augmentation-averaged maps, normalization, background assembly, and the
// pairwise refinement when enabled. The labeled overload zeroes maps of
// classes absent from `labels` (the usual protocol when image-level labels
// are known, as they are for training images); the plain overload keeps all
// classes in play.
Prediction predict(const Model& model, const data::RGBImage& image,
                   const std::vector<int>& labels);
Prediction predict(const Model& model, const data::RGBImage& image);

}  // namespace histoseg::pipeline
