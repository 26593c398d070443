#include "histoseg/pipeline/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "histoseg/core/error.hpp"
#include "histoseg/core/rng.hpp"
#include "histoseg/data/image.hpp"
#include "histoseg/encoders/toy_backend.hpp"
#include "histoseg/protocam/prompts.hpp"

namespace histoseg::pipeline {

namespace {

using encoders::ToyVisionLanguageBackend;

struct ClassTexture {
  std::array<double, 8> mixture{};  // anchor sampling distribution, sums to 1
  int peak = 0;
};

// Class textures come from the same prompt-to-concept mapping the toy text
// tower uses, so the painted regions genuinely carry the classes' semantics.
// Pixels sample an anchor (mostly the dominant one) and never blend anchor
// colors; a blend could land near a different anchor entirely.
std::array<ClassTexture, data::kNumClasses> class_textures() {
  std::array<ClassTexture, data::kNumClasses> out;
  const auto& prompts = protocam::default_prompts();
  for (int c = 0; c < data::kNumClasses; ++c) {
    std::array<double, 8> u = ToyVisionLanguageBackend::prompt_concept(prompts[static_cast<size_t>(c)]);
    double sum = 0.0;
    for (double v : u) sum += v;
    for (double& v : u) v /= sum;
    ClassTexture t;
    t.mixture = u;
    t.peak = static_cast<int>(std::max_element(u.begin(), u.end()) - u.begin());
    out[static_cast<size_t>(c)] = t;
  }
  return out;
}

int sample_anchor(const ClassTexture& t, core::Rng& rng) {
  if (rng.uniform() < 0.85) return t.peak;
  double r = rng.uniform(), acc = 0.0;
  for (int a = 0; a < 8; ++a) {
    acc += t.mixture[static_cast<size_t>(a)];
    if (r < acc) return a;
  }
  return t.peak;
}

void paint_pixel(data::RGBImage& img, int y, int x, int anchor, double jitter, core::Rng& rng) {
  const auto& colors = ToyVisionLanguageBackend::anchor_colors();
  for (int ch = 0; ch < 3; ++ch) {
    double v = colors[static_cast<size_t>(anchor)][static_cast<size_t>(ch)] +
               rng.uniform(-jitter, jitter);
    img.at(y, x, ch) = std::clamp(v, 0.0, 1.0);
  }
}

struct Shape {
  bool ellipse = false;
  double cy = 0, cx = 0, ry = 0, rx = 0;  // ellipse params, fractional
  double y0 = 0, x0 = 0, y1 = 0, x1 = 0;  // rectangle corners, fractional

  bool contains(double fy, double fx) const {
    if (ellipse) {
      const double dy = (fy - cy) / ry, dx = (fx - cx) / rx;
      return dy * dy + dx * dx <= 1.0;
    }
    return fy >= y0 && fy < y1 && fx >= x0 && fx < x1;
  }
};

// Large regions, placed in complementary halves when two classes share an
// image, so even a very coarse activation grid can tell them apart.
Shape make_shape(core::Rng& rng, int slot, int slots, bool vertical_split) {
  const double lo = slots == 1 ? 0.0 : (slot == 0 ? 0.0 : 0.5);
  const double hi = slots == 1 ? 1.0 : (slot == 0 ? 0.5 : 1.0);
  Shape s;
  s.ellipse = rng.uniform() < 0.5;
  if (s.ellipse) {
    const double span = hi - lo;
    double cy = lo + rng.uniform(0.3, 0.7) * span;
    double cx = rng.uniform(0.3, 0.7);
    if (!vertical_split) std::swap(cy, cx);
    s.cy = cy;
    s.cx = cx;
    s.ry = rng.uniform(0.18, 0.30) * (vertical_split ? span / 0.5 : 1.0);
    s.rx = rng.uniform(0.18, 0.30) * (vertical_split ? 1.0 : span / 0.5);
  } else {
    double a0 = lo + rng.uniform(0.02, 0.12) * (hi - lo) * 2.0;
    double a1 = hi - rng.uniform(0.02, 0.12) * (hi - lo) * 2.0;
    double b0 = rng.uniform(0.05, 0.25);
    double b1 = 1.0 - rng.uniform(0.05, 0.25);
    if (vertical_split) {
      s.y0 = a0;
      s.y1 = a1;
      s.x0 = b0;
      s.x1 = b1;
    } else {
      s.y0 = b0;
      s.y1 = b1;
      s.x0 = a0;
      s.x1 = a1;
    }
  }
  return s;
}

}  // namespace

data::Manifest synthesize_dataset(const SynthConfig& cfg) {
  if (cfg.count < 1) core::fail(core::Error::Kind::argument, "synth: count must be >= 1");
  if (cfg.image_size < 16) core::fail(core::Error::Kind::argument, "synth: image_size must be >= 16");
  if (cfg.out_dir.empty()) core::fail(core::Error::Kind::argument, "synth: out_dir is required");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(cfg.out_dir) / "images", ec);
  fs::create_directories(fs::path(cfg.out_dir) / "masks", ec);
  if (ec) core::fail(core::Error::Kind::io, "synth: cannot create " + cfg.out_dir);

  const auto textures = class_textures();
  const int s = cfg.image_size;

  data::Manifest manifest;
  manifest.root = cfg.out_dir;

  for (int i = 0; i < cfg.count; ++i) {
    core::Rng rng(cfg.seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(i + 1));

    // Every class appears regularly; half the images carry a second class.
    std::vector<int> classes{i % data::kNumClasses};
    if (rng.uniform() < 0.5) {
      int other = rng.uniform_int(data::kNumClasses - 1);
      if (other >= classes[0]) ++other;
      classes.push_back(other);
    }
    const bool vertical_split = rng.uniform() < 0.5;

    std::vector<Shape> shapes;
    for (size_t k = 0; k < classes.size(); ++k)
      shapes.push_back(make_shape(rng, static_cast<int>(k), static_cast<int>(classes.size()),
                                  vertical_split));

    data::RGBImage img = data::RGBImage::filled(s, s, 0, 0, 0);
    data::SegmentationMask mask;
    mask.h = s;
    mask.w = s;
    mask.labels.assign(static_cast<size_t>(s) * s, static_cast<uint8_t>(data::kBackgroundLabel));

    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        const double fy = (y + 0.5) / s, fx = (x + 0.5) / s;
        int hit = -1;
        for (size_t k = 0; k < shapes.size(); ++k)
          if (shapes[k].contains(fy, fx)) hit = static_cast<int>(k);
        if (hit < 0) {
          paint_pixel(img, y, x, 0, 0.02, rng);
        } else {
          const int cls = classes[static_cast<size_t>(hit)];
          paint_pixel(img, y, x, sample_anchor(textures[static_cast<size_t>(cls)], rng), 0.03, rng);
          mask.at(y, x) = static_cast<uint8_t>(cls);
        }
      }
    }

    // A second shape can bury the first class; image-level labels must only
    // name classes that actually kept pixels. Buried remnants (under 1% of
    // the image) are repainted as background.
    std::array<std::int64_t, data::kNumClasses> area{};
    for (uint8_t v : mask.labels)
      if (v < data::kNumClasses) ++area[v];
    const std::int64_t min_area = static_cast<std::int64_t>(s) * s / 100;
    std::array<bool, data::kNumClasses> keep{};
    for (int c = 0; c < data::kNumClasses; ++c) keep[static_cast<size_t>(c)] = area[static_cast<size_t>(c)] >= min_area;
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        uint8_t v = mask.at(y, x);
        if (v < data::kNumClasses && !keep[v]) {
          paint_pixel(img, y, x, 0, 0.02, rng);
          mask.at(y, x) = static_cast<uint8_t>(data::kBackgroundLabel);
        }
      }

    char name[32];
    std::snprintf(name, sizeof(name), "img_%03d.png", i);
    const std::string img_rel = std::string("images/") + name;
    const std::string mask_rel = std::string("masks/") + name;
    data::save_image(manifest.resolve(img_rel), img);
    data::save_mask(manifest.resolve(mask_rel), mask);

    data::Record rec;
    rec.image = img_rel;
    rec.mask = mask_rel;
    for (int c : classes)
      if (keep[static_cast<size_t>(c)]) rec.labels[static_cast<size_t>(c)] = 1;
    manifest.records.push_back(std::move(rec));
  }

  data::write_manifest((fs::path(cfg.out_dir) / "manifest.jsonl").string(), manifest);
  return manifest;
}

}  // namespace histoseg::pipeline
