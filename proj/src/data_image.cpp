#include "histoseg/data/image.hpp"

#include <algorithm>
#include <cmath>

#include "histoseg/core/error.hpp"
#include "histoseg/core/interp.hpp"
#include "histoseg/core/png_io.hpp"

namespace histoseg::data {

using core::Error;
using core::fail;

RGBImage RGBImage::filled(int h, int w, double r, double g, double b) {
  RGBImage img;
  img.h = h;
  img.w = w;
  img.px.resize(static_cast<size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  return img;
}

RGBImage load_image(const std::string& path, int target_size) {
  const core::PngImage8 raw = core::read_png8(path, 3);
  RGBImage img;
  img.h = raw.h;
  img.w = raw.w;
  img.px.resize(static_cast<size_t>(raw.h) * raw.w * 3);
  for (size_t i = 0; i < img.px.size(); ++i) img.px[i] = raw.bytes[i] / 255.0;
  if (target_size > 0 && (img.h != target_size || img.w != target_size))
    img = resize_image(img, target_size, target_size);
  return img;
}

void save_image(const std::string& path, const RGBImage& img) {
  std::vector<uint8_t> bytes(img.px.size());
  for (size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(img.px[i], 0.0, 1.0);
    bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  core::write_png8(path, img.w, img.h, 3, bytes);
}

SegmentationMask load_mask(const std::string& path) {
  const core::PngImage8 raw = core::read_png8(path, 1);
  SegmentationMask m;
  m.h = raw.h;
  m.w = raw.w;
  m.labels = raw.bytes;
  return m;
}

void save_mask(const std::string& path, const SegmentationMask& mask) {
  core::write_png8(path, mask.w, mask.h, 1, mask.labels);
}

RGBImage resize_image(const RGBImage& img, int oh, int ow) {
  if (img.h <= 0 || img.w <= 0) fail(Error::Kind::shape, "resize_image: empty image");
  RGBImage out;
  out.h = oh;
  out.w = ow;
  out.px.resize(static_cast<size_t>(oh) * ow * 3);
  std::vector<double> plane(static_cast<size_t>(img.h) * img.w);
  std::vector<double> oplane(static_cast<size_t>(oh) * ow);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        plane[static_cast<size_t>(y) * img.w + x] = img.at(y, x, c);
    core::resize_bilinear_plane(plane.data(), img.h, img.w, oplane.data(), oh, ow);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) out.at(y, x, c) = oplane[static_cast<size_t>(y) * ow + x];
  }
  return out;
}

RGBImage hflip(const RGBImage& img) {
  RGBImage out = img;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
  return out;
}

RGBImage adjust_brightness(const RGBImage& img, double factor) {
  RGBImage out = img;
  for (auto& v : out.px) v = std::clamp(v * factor, 0.0, 1.0);
  return out;
}

}  // namespace histoseg::data
