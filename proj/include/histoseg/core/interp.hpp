#pragma once

#include <cstdint>
#include <vector>

#include "histoseg/core/tensor.hpp"

namespace histoseg::core {

// Bilinear resampling with half-pixel sample centers (align_corners = false).
// Source coordinate for output index o: (o + 0.5) * in/out - 0.5, clamped.
// The same convention is used everywhere a tensor or image changes resolution.
void resize_bilinear_plane(const double* src, int h, int w, double* dst, int oh, int ow);

Tensor resize_bilinear_chw(const Tensor& src, int oh, int ow);

// Nearest-neighbor for label maps; never interpolates class indices.
std::vector<uint8_t> resize_nearest_labels(const std::vector<uint8_t>& src, int h, int w, int oh,
                                           int ow);

}  // namespace histoseg::core
