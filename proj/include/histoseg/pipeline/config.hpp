#pragma once

#include <cstdint>
#include <string>

#include "histoseg/distill/distill.hpp"
#include "histoseg/postprocess/postprocess.hpp"
#include "histoseg/refine/refine.hpp"

namespace histoseg::pipeline {

// Every knob a run can turn, collected in one document. Defaults reproduce
// the reference training recipe; a JSON config file overrides individual
// fields and unknown keys are schema errors so typos cannot silently fall
// back to defaults.
struct RunConfig {
  // train.*
  int epochs = 2;
  double learning_rate = 2e-5;
  double weight_decay = 0.001;
  int batch_size = 10;
  std::uint64_t seed = 1;
  std::string backend = "toy";
  int image_size = 224;

  // distill.* (weight mirrors loss.struct; they are the same knob)
  distill::DistillConfig distill_cfg;

  // proto.*
  int proto_n_ratio = 4;
  double logit_scale_init = 1.0 / 0.07;

  // refine.*
  double refine_alpha = 0.5;
  double refine_temperature = 0.07;
  int bank_capacity = 2048;

  // loss.*
  refine::LossWeights loss;

  // crf.*, tta.*, post.*
  postprocess::CrfParams crf;
  postprocess::TtaConfig tta;
  postprocess::PostprocessConfig post;
};

void validate(const RunConfig& cfg);

// Parses the JSON text of a config document over the defaults.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

// Canonical JSON rendering; parse(render(cfg)) == cfg.
std::string config_to_json(const RunConfig& cfg);

// Stable hex digest of the canonical rendering, recorded in checkpoints so a
// resumed run can detect a mismatched configuration.
std::string config_hash(const RunConfig& cfg);

}  // namespace histoseg::pipeline
