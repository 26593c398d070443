#pragma once

#include <string>
#include <vector>

#include "histoseg/core/autograd.hpp"
#include "histoseg/core/rng.hpp"
#include "histoseg/encoders/backend.hpp"

namespace histoseg::protocam {

struct ProtoDims {
  int d_text = 32;           // frozen text embedding width
  int d_proto = 32;          // prototype width; kept equal to d_text
  int n_ratio = 4;           // projection hidden = n_ratio * d_proto
  int student_channels = 64; // width of the projected prototypes P_4
  double logit_scale_init = 1.0 / 0.07;
};

// One forward pass worth of prototype tensors, rebuilt from the current
// parameters every time.
struct PrototypeForward {
  core::Var p_tilde;  // C x d_proto, unit rows
  core::Var p4;       // C x student_channels, unnormalized
};

// Text-seeded trainable prototypes. The projection MLP runs as a residual
// around the frozen text embeddings and its second layer starts at zero, so
// the initial normalized prototypes are exactly the normalized text
// embeddings; likewise the adaptive stage starts as zero-padding into the
// visual width. Training bends both away from there.
class PrototypeBank {
 public:
  PrototypeBank(core::ParamStore& store, core::Tensor text_embeddings,
                ProtoDims dims, core::Rng& rng);

  PrototypeForward forward(core::Graph& g) const;

  // Trainable background prototype, normalized on use by callers.
  core::Var background(core::Graph& g) const;

  int class_count() const { return text_.dim(0); }
  const ProtoDims& dims() const { return dims_; }
  const core::Tensor& text_embeddings() const { return text_; }

 private:
  core::Tensor text_;  // C x d_text, frozen
  ProtoDims dims_;
  core::Param* proj1_w_;
  core::Param* proj1_b_;
  core::Param* proj2_w_;
  core::Param* proj2_b_;
  core::Param* adapt1_w_;
  core::Param* adapt1_b_;
  core::Param* adapt2_w_;
  core::Param* adapt2_b_;
  core::Param* bg_;
};

// Encodes the class prompts with the backend's text tower and builds the
// bank. Exactly one prompt per foreground class, class-ordered.
PrototypeBank init_prototypes(core::ParamStore& store,
                              const encoders::EncoderBackend& backend,
                              const std::vector<std::string>& prompts,
                              ProtoDims dims, core::Rng& rng);

// Trainable temperature for the cosine maps, clamped positive on use.
class CamHead {
 public:
  CamHead(core::ParamStore& store, double init);
  core::Var logit_scale(core::Graph& g) const;  // clamped to [1, 100]
  double value() const;

 private:
  core::Param* tau_;
};

// Raw class activation maps kept in token-major form (N x C); grid metadata
// recovers the spatial layout.
struct CamSet {
  core::Var scores;  // (grid_h * grid_w) x C, raw logits
  int grid_h = 0;
  int grid_w = 0;
};

// G = tau * (normalized tokens) . (normalized prototypes)^T.
CamSet generate_cams(core::Graph& g, const PrototypeForward& protos,
                     const CamHead& head, core::Var refined_level4);

// Per-class spatial mean of the raw maps fed to BCE-with-logits against the
// image-level labels.
core::Var classification_loss(core::Graph& g, const CamSet& cams,
                              const std::vector<int>& labels);

// Plain-tensor view of the raw maps, C x grid_h x grid_w.
core::Tensor cams_to_chw(const CamSet& cams);

// Label-masks and min-max normalizes raw maps to [0,1] per class. Classes
// with label 0 become identically zero, as do constant maps.
core::Tensor normalize_cams(const core::Tensor& cams_chw,
                            const std::vector<int>& labels);

}  // namespace histoseg::protocam
