#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace histoseg::core {

struct PngImage8 {
  int w = 0, h = 0, channels = 0;  // 1 (gray) or 3 (rgb)
  std::vector<uint8_t> bytes;      // row-major, interleaved
};

// Decodes any PNG libpng can expand to 8-bit. want_channels selects the target
// layout: 3 converts gray/palette to RGB and strips alpha; 1 accepts only
// grayscale sources (label maps must never be channel-averaged).
PngImage8 read_png8(const std::string& path, int want_channels);

// Fixed encoder settings (filter NONE, zlib level 6, no ancillary chunks) so
// repeated writes of the same pixels are byte-identical.
void write_png8(const std::string& path, int w, int h, int channels,
                const std::vector<uint8_t>& bytes);

}  // namespace histoseg::core
