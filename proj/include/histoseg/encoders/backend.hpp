#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "histoseg/core/tensor.hpp"
#include "histoseg/data/image.hpp"

namespace histoseg::encoders {

// Multi-scale feature maps produced by a frozen encoder. Levels are ordered
// coarse-to-fine-agnostic: index k holds the stride 4*2^k map, CHW layout.
struct FeaturePyramid {
  std::string role;  // "student" or "teacher"
  std::vector<core::Tensor> levels;

  int level_count() const { return static_cast<int>(levels.size()); }
  std::pair<int, int> grid(int k) const {
    return {levels[k].dim(1), levels[k].dim(2)};
  }
};

struct BackendInfo {
  std::string name;
  std::string degraded_from;  // non-empty when a requested backend fell back
  int student_channels = 0;   // per-level channel count of the student tower
  int text_dim = 0;           // text embedding width (= global image embed width)
  std::array<int, 4> teacher_channels{};
  std::array<int, 4> strides{4, 8, 16, 32};
  std::int64_t frozen_student_params = 0;  // vision + text towers
  std::int64_t frozen_teacher_params = 0;
};

// A frozen encoder pair plus the text tower. Implementations must be pure:
// same instance, same inputs, same outputs, no internal state updates.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual const BackendInfo& info() const = 0;

  // Four-level pyramid at strides 4/8/16/32, grid ceil(H/s) x ceil(W/s).
  virtual FeaturePyramid student_pyramid(const data::RGBImage& img) const = 0;
  virtual FeaturePyramid teacher_pyramid(const data::RGBImage& img) const = 0;

  // Unit-norm text embedding, deterministic per (prompt, seed). Empty prompt
  // is an argument error.
  virtual core::Tensor encode_text(const std::string& prompt) const = 0;

  // Unit-norm global embedding of a whole image, same space as encode_text.
  virtual core::Tensor encode_image_global(const data::RGBImage& img) const = 0;
};

// Factory. Known names: "toy", "conch+segformer". Unknown names raise a
// backend error. "conch+segformer" needs pretrained weight archives; when
// they are absent it returns a toy instance with info().degraded_from set
// and a warning on stderr.
std::unique_ptr<EncoderBackend> create_backend(const std::string& name,
                                               std::uint64_t seed);

// Static descriptor for a known backend name without instantiating it.
BackendInfo describe_backend(const std::string& name);

std::vector<std::string> known_backends();

}  // namespace histoseg::encoders
