#include "histoseg/pipeline/evaluate.hpp"

#include <iostream>

#include "histoseg/core/error.hpp"
#include "histoseg/core/interp.hpp"

namespace histoseg::pipeline {

EvalResult evaluate(const Model& model, const data::Manifest& manifest,
                    const EvalOptions& options) {
  if (manifest.records.empty())
    core::fail(core::Error::Kind::argument, "evaluate: manifest has no records");

  EvalResult result;
  metrics::ConfusionMatrix conf;
  for (const data::Record& rec : manifest.records) {
    if (!rec.mask) {
      std::cerr << "[histoseg] warning: no ground-truth mask for " << rec.image << ", skipped\n";
      ++result.skipped;
      continue;
    }
    data::RGBImage image = data::load_image(manifest.resolve(rec.image), model.cfg.image_size);
    data::SegmentationMask pred;
    if (options.predictor) {
      pred = options.predictor(rec, image);
    } else if (options.use_labels) {
      pred = predict(model, image, {rec.labels.begin(), rec.labels.end()}).mask;
    } else {
      pred = predict(model, image).mask;
    }

    data::SegmentationMask gt = data::load_mask(manifest.resolve(*rec.mask));
    if (gt.h != pred.h || gt.w != pred.w) {
      data::SegmentationMask resized;
      resized.h = pred.h;
      resized.w = pred.w;
      resized.labels = core::resize_nearest_labels(gt.labels, gt.h, gt.w, pred.h, pred.w);
      gt = std::move(resized);
    }
    metrics::accumulate(conf, pred, gt);
    ++result.evaluated;
    if (options.progress)
      *options.progress << "evaluated " << result.evaluated << ": " << rec.image << "\n";
  }
  if (result.evaluated == 0)
    core::fail(core::Error::Kind::argument, "evaluate: no record carried a ground-truth mask");
  result.report = metrics::compute_report(conf);
  return result;
}

}  // namespace histoseg::pipeline
