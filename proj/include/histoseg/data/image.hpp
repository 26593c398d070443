#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace histoseg::data {

// RGB image, values in [0,1], interleaved row-major (HWC).
struct RGBImage {
  int h = 0, w = 0;
  std::vector<double> px;

  double& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  double at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  static RGBImage filled(int h, int w, double r, double g, double b);
};

// Dense label map; values 0..kNumClasses-1 are tissue classes, kBackgroundLabel
// is background.
struct SegmentationMask {
  int h = 0, w = 0;
  std::vector<uint8_t> labels;

  uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * w + x]; }
  uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * w + x]; }
};

// Decodes a PNG to [0,1] RGB; target_size > 0 resizes (bilinear, half-pixel
// centers) to target_size x target_size.
RGBImage load_image(const std::string& path, int target_size);
void save_image(const std::string& path, const RGBImage& img);

// Label maps are stored as single-channel 8-bit PNGs whose pixel values are
// class indices.
SegmentationMask load_mask(const std::string& path);
void save_mask(const std::string& path, const SegmentationMask& mask);

RGBImage resize_image(const RGBImage& img, int oh, int ow);
RGBImage hflip(const RGBImage& img);
// Scales all channels and clamps back to [0,1].
RGBImage adjust_brightness(const RGBImage& img, double factor);

}  // namespace histoseg::data
