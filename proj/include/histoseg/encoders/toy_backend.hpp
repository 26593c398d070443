#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "histoseg/core/rng.hpp"
#include "histoseg/encoders/backend.hpp"

namespace histoseg::encoders {

// Width knobs for the toy towers. Defaults are the desk-scale configuration;
// gradient-check tests shrink them further.
struct ToyDims {
  int student_channels = 64;
  int text_dim = 32;
  std::array<int, 4> teacher_channels{16, 32, 48, 64};
};

// Deterministic stand-in for the frozen encoder pair, built around a shared
// concept space so that text prompts, global image embeddings, and the
// level-4 student features are actually aligned (the property the real
// pretrained towers are used for).
//
// Every pixel gets a soft assignment over 8 fixed anchor colors (anchor 0 is
// pale background tissue). A 12-dim descriptor per pixel (8 concept weights,
// 3 rgb channels, 1 gradient magnitude) is block-averaged to each pyramid
// grid and pushed through fixed random projections. The first text_dim
// channels of the student's level-4 map are W_txt * concept_mean, the same
// projection used by encode_text and encode_image_global, so cosine between
// a text prototype and a level-4 token measures concept overlap.
class ToyVisionLanguageBackend final : public EncoderBackend {
 public:
  explicit ToyVisionLanguageBackend(std::uint64_t seed, ToyDims dims = {},
                                    std::string degraded_from = "");

  const BackendInfo& info() const override { return info_; }
  FeaturePyramid student_pyramid(const data::RGBImage& img) const override;
  FeaturePyramid teacher_pyramid(const data::RGBImage& img) const override;
  core::Tensor encode_text(const std::string& prompt) const override;
  core::Tensor encode_image_global(const data::RGBImage& img) const override;

  // Mixture over the 8 anchors a prompt denotes (entry 0 always 0). The
  // synthetic data generator paints class textures from this same mixture,
  // which is what stands in for vision-language pretraining alignment.
  // Seed-independent: a prompt means the same thing in every toy instance.
  static std::array<double, 8> prompt_concept(const std::string& prompt);

  static const std::array<std::array<double, 3>, 8>& anchor_colors();

  // Pixel -> soft concept assignment, exposed for the data generator.
  static std::array<double, 8> pixel_concept(double r, double g, double b);

 private:
  core::Tensor descriptor_field(const data::RGBImage& img) const;

  ToyDims dims_;
  std::uint64_t seed_;
  BackendInfo info_;
  std::array<core::Tensor, 3> w_level_;  // levels 1..3: student_channels x 12
  core::Tensor w_aux_;                   // (student_channels - text_dim) x 12
  core::Tensor w_txt_;                   // text_dim x 8
  std::array<core::Tensor, 4> v_level_;  // teacher: teacher_channels[k] x 12
};

}  // namespace histoseg::encoders
