#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "histoseg/core/tensor.hpp"
#include "histoseg/pipeline/model.hpp"

namespace histoseg::pipeline {

// Trainable state frozen at one step: every parameter tensor, the memory
// bank contents, and enough bookkeeping to resume or audit. Tensors are
// stored as little-endian float32, so a round trip costs one quantization
// (forward outputs move by < 1e-6 relative) and repeated save/load cycles
// are byte-stable.
struct Checkpoint {
  int version = 1;
  std::string config_hash;
  std::int64_t step = 0;
  std::vector<std::pair<std::string, core::Tensor>> tensors;  // creation order
  std::vector<core::Tensor> bank_items;                       // oldest first
  int bank_cursor = 0;
  int bank_capacity = 0;
};

Checkpoint snapshot_model(const Model& model, std::int64_t step);

// Writes checkpoint state into the model. Parameter names and shapes must
// match exactly; the bank is rebuilt from the snapshot.
void apply_checkpoint(Model& model, const Checkpoint& ckpt);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace histoseg::pipeline
