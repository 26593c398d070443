#pragma once

#include <iosfwd>
#include <vector>

#include "histoseg/data/manifest.hpp"
#include "histoseg/pipeline/checkpoint.hpp"
#include "histoseg/pipeline/model.hpp"
#include "histoseg/pipeline/optim.hpp"

namespace histoseg::pipeline {

struct TrainSample {
  data::RGBImage image;
  std::vector<int> labels;  // 0/1 per foreground class
};

struct StepLosses {
  double cls = 0.0;
  double structural = 0.0;
  double sim = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
  bool finite = true;
};

// One optimizer step over a batch: forward both towers per image, average the
// three loss components across the batch, backpropagate the weighted total,
// clip and update. Background region embeddings enter the memory bank as a
// side effect. If any component comes out non-finite, no update happens and
// `finite` is false.
StepLosses train_step(Model& model, AdamW& opt, const std::vector<TrainSample>& batch);

struct TrainResult {
  Checkpoint checkpoint;  // final state, or last good state when aborted
  std::vector<StepLosses> history;
  std::int64_t steps = 0;
  bool aborted = false;
};

// Full run over the manifest: epochs, per-epoch seeded shuffle, batching,
// per-step component logging to `log` (pass nullptr for silence). A non-finite
// loss aborts and returns the checkpoint taken before the failing step.
TrainResult train(Model& model, const data::Manifest& manifest, std::ostream* log);

}  // namespace histoseg::pipeline
