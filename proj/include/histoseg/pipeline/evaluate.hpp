#pragma once

#include <functional>

#include "histoseg/data/manifest.hpp"
#include "histoseg/metrics/metrics.hpp"
#include "histoseg/pipeline/model.hpp"

namespace histoseg::pipeline {

struct EvalOptions {
  // Test seam: when set, replaces the model's predictor entirely.
  std::function<data::SegmentationMask(const data::Record&, const data::RGBImage&)> predictor;
  // Gate each prediction on the record's image-level labels (the standard
  // protocol when scoring masks for images whose labels are known). When
  // false every class stays in play, as for unseen images.
  bool use_labels = true;
  std::ostream* progress = nullptr;
};

struct EvalResult {
  metrics::MetricReport report;
  int evaluated = 0;
  int skipped = 0;  // records without a ground-truth mask
};

// Predicts every masked record, accumulates one confusion matrix, and reports.
// Records without masks are skipped with a warning. Ground-truth masks whose
// dims differ from the prediction are nearest-resized (labels never blend).
EvalResult evaluate(const Model& model, const data::Manifest& manifest,
                    const EvalOptions& options = {});

}  // namespace histoseg::pipeline
