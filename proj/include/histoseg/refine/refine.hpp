#pragma once

#include <optional>
#include <vector>

#include "histoseg/core/autograd.hpp"
#include "histoseg/data/image.hpp"
#include "histoseg/encoders/backend.hpp"
#include "histoseg/protocam/prototypes.hpp"

namespace histoseg::refine {

struct ThresholdConfig {
  double alpha = 0.5;  // threshold ratio in (0,1)
};

// Complementary foreground/background masks for one class map. Stored as
// 0/1 tensors so they multiply straight into images.
struct BinaryMaskPair {
  core::Tensor fg;  // (h, w) of {0,1}
  core::Tensor bg;
  int class_index = -1;

  std::int64_t fg_count() const;
  std::int64_t bg_count() const;
};

// t = alpha * max(cam); fg = [cam >= t], bg the complement. An all-zero map
// would make the >= rule select everything, so it is overridden to an empty
// foreground.
BinaryMaskPair adaptive_threshold(const core::Tensor& cam, ThresholdConfig cfg,
                                  int class_index = -1);

// Zeroes out-of-mask pixels and encodes the result with the frozen student
// image tower. An empty mask yields nothing (the caller skips the region).
std::optional<core::Tensor> region_embed(const encoders::EncoderBackend& backend,
                                         const data::RGBImage& image,
                                         const core::Tensor& mask);

// FIFO ring of unit-norm negative embeddings.
class MemoryBank {
 public:
  explicit MemoryBank(int capacity = 2048);

  void push(const core::Tensor& v);  // contract error unless ~unit-norm
  int fill() const { return fill_; }
  int capacity() const { return capacity_; }
  // Stored vectors, oldest first.
  std::vector<core::Tensor> snapshot() const;
  // Raw state for checkpointing.
  int cursor() const { return cursor_; }
  void restore(std::vector<core::Tensor> items, int cursor);

 private:
  int capacity_;
  int cursor_ = 0;
  int fill_ = 0;
  std::vector<core::Tensor> ring_;
};

// -log( exp(q.p/T) / (exp(q.p/T) + sum_i exp(q.n_i/T)) ). The query comes
// from the frozen tower, so it enters as a constant; positives/negatives may
// be trainable. Zero when there are no negatives.
core::Var infonce(core::Graph& g, const core::Tensor& query, core::Var positive,
                  const std::vector<core::Var>& negatives,
                  const std::vector<core::Tensor>& negative_consts,
                  double temperature);

// One encoded region feeding the contrastive loss.
struct Region {
  core::Tensor embedding;  // unit-norm, frozen-tower output
  int class_index = -1;
  bool is_fg = true;
};

// Foreground term: each FG embedding is pulled to its class prototype row and
// pushed from the other class prototypes plus the memory bank. Background
// term: each BG embedding is pulled to the background prototype and pushed
// from every class prototype. Terms average over their regions; afterwards
// the BG embeddings are enqueued as future negatives.
core::Var sim_loss(core::Graph& g, const std::vector<Region>& regions,
                   const protocam::PrototypeBank& bank, MemoryBank& mem,
                   double temperature);

// Thresholds every labeled class's normalized map at image resolution and
// encodes the resulting FG/BG regions.
std::vector<Region> extract_regions(const encoders::EncoderBackend& backend,
                                    const data::RGBImage& image,
                                    const core::Tensor& norm_cams,
                                    const std::vector<int>& labels,
                                    ThresholdConfig cfg);

struct LossWeights {
  double cls = 1.0;
  double structural = 1.5;
  double sim = 0.2;
};

// Weighted sum of the three components; any non-finite component is a
// contract error so training can abort with a diagnostic.
core::Var total_loss(core::Graph& g, core::Var l_cls, core::Var l_struct,
                     core::Var l_sim, LossWeights w);

}  // namespace histoseg::refine
