#pragma once

#include <functional>

#include "histoseg/core/tensor.hpp"
#include "histoseg/data/image.hpp"

namespace histoseg::postprocess {

// Fixed 6-augmentation scheme: {no flip, horizontal flip} x brightness
// {0.9, 1.0, 1.1}. Disabled means one plain forward pass.
struct TtaConfig {
  bool enabled = true;
};

// Averages raw class maps over the augmentations, undoing the flip on the
// flipped branches first. `forward` maps an image to raw maps (C, gh, gw).
core::Tensor tta_cams(
    const std::function<core::Tensor(const data::RGBImage&)>& forward,
    const data::RGBImage& image, const TtaConfig& cfg);

struct PostprocessConfig {
  double bg_exponent = 10.0;
  bool crf_enabled = true;
};

// (1 - max_activation)^exponent, the raw background score of one pixel.
double background_probability(double max_activation, double exponent);

// Stacks the C normalized maps with the derived background channel (last)
// and renormalizes per pixel. Input maps must already be at the output
// resolution and in [0,1].
core::Tensor assemble_probabilities(const core::Tensor& norm_cams,
                                    const PostprocessConfig& cfg);

// Per-pixel argmax over a (L, H, W) score stack; ties pick the lowest
// channel. Channel order is the C foreground classes then background, so the
// emitted labels line up with the dataset convention.
data::SegmentationMask argmax_mask(const core::Tensor& probs);

struct CrfParams {
  double w1 = 30.0;  // smoothness weight
  double sa = 15.0;  // smoothness spatial sigma, pixels
  double w2 = 50.0;  // appearance weight
  double sb = 10.0;  // appearance spatial sigma, pixels
  double sg = 20.0;  // appearance color sigma, 0-255 intensity units
  int iterations = 5;
};

void validate(const CrfParams& p);

// Fully-connected pairwise model over the image lattice. Unary potentials
// are -log P with P a proper per-pixel distribution.
struct CrfProblem {
  core::Tensor unary;        // (L, H, W)
  core::Tensor intensities;  // (3, H, W), 0-255 scale
  CrfParams params;
};

// Builds the problem from a per-pixel label distribution: probabilities are
// floored at 1e-8 and renormalized before the log.
CrfProblem make_crf_problem(const core::Tensor& probs,
                            const data::RGBImage& image, const CrfParams& p);

// Mean-field inference, synchronous updates, exactly params.iterations
// rounds. Messages follow the Potts form sum_{j != i} K_ij (1 - Q_j(l)) with
// a truncated-window evaluation (radius 3 sigma per kernel; the smoothness
// kernel runs separably, the appearance kernel uses offset/color lookup
// tables). Returns the final Q, a per-pixel distribution.
core::Tensor crf_inference(const CrfProblem& problem);

// crf_inference followed by argmax_mask.
data::SegmentationMask dense_crf(const CrfProblem& problem);

}  // namespace histoseg::postprocess
