#pragma once

#include <cstdint>
#include <string>

#include "histoseg/data/manifest.hpp"

namespace histoseg::pipeline {

// Synthetic blob dataset for desk-scale runs: large textured class regions
// over pale background tissue, with image-level labels in the manifest and
// dense masks written alongside (held out from training, used only by eval).
struct SynthConfig {
  int count = 64;
  int image_size = 64;
  std::uint64_t seed = 7;
  std::string out_dir;
};

// Writes images/, masks/, and manifest.jsonl under out_dir and returns the
// manifest (also loadable from disk later).
data::Manifest synthesize_dataset(const SynthConfig& cfg);

}  // namespace histoseg::pipeline
