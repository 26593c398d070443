#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "histoseg/data/classes.hpp"
#include "histoseg/data/image.hpp"

namespace histoseg::metrics {

// Pixel confusion over the foreground classes plus background. Rows index the
// ground truth label, columns the prediction. Matrices over the same label set
// merge by addition, so per-image accumulation order never matters.
struct ConfusionMatrix {
  static constexpr int kLabels = data::kNumClasses + 1;
  std::vector<std::int64_t> counts = std::vector<std::int64_t>(kLabels * kLabels, 0);

  std::int64_t& at(int gt, int pred) { return counts[static_cast<size_t>(gt) * kLabels + pred]; }
  std::int64_t at(int gt, int pred) const { return counts[static_cast<size_t>(gt) * kLabels + pred]; }
  std::int64_t total() const;
};

void accumulate(ConfusionMatrix& conf, const data::SegmentationMask& pred,
                const data::SegmentationMask& gt);

ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b);

struct ClassMetrics {
  std::int64_t tp = 0, fp = 0, fn = 0;
  bool present = false;  // class appears in prediction or ground truth
  double iou = 0.0;
  double dice = 0.0;
};

// Foreground-class IoU/Dice and their means. Classes with an empty union are
// left out of the means; `mean_classes` says how many contributed.
struct MetricReport {
  std::vector<ClassMetrics> per_class;  // size kNumClasses, class order
  double miou = 0.0;
  double mdice = 0.0;
  int mean_classes = 0;
  std::int64_t pixels = 0;
  double pixel_accuracy = 0.0;  // over all labels, background included
};

MetricReport compute_report(const ConfusionMatrix& conf);

std::string format_report(const MetricReport& r);
std::string report_to_json(const MetricReport& r);

}  // namespace histoseg::metrics
