#include "histoseg/metrics/metrics.hpp"

#include <cstdio>
#include <numeric>

#include "json.hpp"

#include "histoseg/core/error.hpp"

namespace histoseg::metrics {

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

void accumulate(ConfusionMatrix& conf, const data::SegmentationMask& pred,
                const data::SegmentationMask& gt) {
  if (pred.h != gt.h || pred.w != gt.w)
    core::fail(core::Error::Kind::shape, "accumulate: prediction and ground truth dims differ");
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    int p = pred.labels[i], t = gt.labels[i];
    if (p >= ConfusionMatrix::kLabels || t >= ConfusionMatrix::kLabels)
      core::fail(core::Error::Kind::argument, "accumulate: label value out of range");
    ++conf.at(t, p);
  }
}

ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b) {
  ConfusionMatrix out = a;
  for (size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += b.counts[i];
  return out;
}

MetricReport compute_report(const ConfusionMatrix& conf) {
  MetricReport r;
  r.pixels = conf.total();
  if (r.pixels == 0) core::fail(core::Error::Kind::argument, "compute_report: empty confusion matrix");

  std::int64_t diag = 0;
  for (int l = 0; l < ConfusionMatrix::kLabels; ++l) diag += conf.at(l, l);
  r.pixel_accuracy = static_cast<double>(diag) / static_cast<double>(r.pixels);

  r.per_class.resize(data::kNumClasses);
  double iou_sum = 0.0, dice_sum = 0.0;
  for (int c = 0; c < data::kNumClasses; ++c) {
    ClassMetrics& m = r.per_class[static_cast<size_t>(c)];
    m.tp = conf.at(c, c);
    for (int l = 0; l < ConfusionMatrix::kLabels; ++l) {
      if (l == c) continue;
      m.fp += conf.at(l, c);
      m.fn += conf.at(c, l);
    }
    std::int64_t uni = m.tp + m.fp + m.fn;
    m.present = uni > 0;
    if (m.present) {
      m.iou = static_cast<double>(m.tp) / static_cast<double>(uni);
      m.dice = 2.0 * static_cast<double>(m.tp) / static_cast<double>(2 * m.tp + m.fp + m.fn);
      iou_sum += m.iou;
      dice_sum += m.dice;
      ++r.mean_classes;
    }
  }
  if (r.mean_classes > 0) {
    r.miou = iou_sum / r.mean_classes;
    r.mdice = dice_sum / r.mean_classes;
  }
  return r;
}

std::string format_report(const MetricReport& r) {
  char buf[160];
  std::string out;
  out += "class     IoU      Dice     TP         FP         FN\n";
  for (int c = 0; c < data::kNumClasses; ++c) {
    const ClassMetrics& m = r.per_class[static_cast<size_t>(c)];
    if (m.present) {
      std::snprintf(buf, sizeof(buf), "%-8s  %7.4f  %7.4f  %-9lld  %-9lld  %-9lld\n",
                    data::class_name(c).c_str(), m.iou, m.dice,
                    static_cast<long long>(m.tp), static_cast<long long>(m.fp),
                    static_cast<long long>(m.fn));
    } else {
      std::snprintf(buf, sizeof(buf), "%-8s  %7s  %7s  %-9s  %-9s  %-9s\n",
                    data::class_name(c).c_str(), "-", "-", "0", "0", "0");
    }
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "mean      %7.4f  %7.4f  (%d classes, %lld pixels, acc %.4f)\n",
                r.miou, r.mdice, r.mean_classes, static_cast<long long>(r.pixels),
                r.pixel_accuracy);
  out += buf;
  return out;
}

std::string report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["miou"] = r.miou;
  j["mdice"] = r.mdice;
  j["mean_classes"] = r.mean_classes;
  j["pixels"] = r.pixels;
  j["pixel_accuracy"] = r.pixel_accuracy;
  nlohmann::json per = nlohmann::json::object();
  for (int c = 0; c < data::kNumClasses; ++c) {
    const ClassMetrics& m = r.per_class[static_cast<size_t>(c)];
    nlohmann::json e;
    e["tp"] = m.tp;
    e["fp"] = m.fp;
    e["fn"] = m.fn;
    e["present"] = m.present;
    if (m.present) {
      e["iou"] = m.iou;
      e["dice"] = m.dice;
    } else {
      e["iou"] = nullptr;
      e["dice"] = nullptr;
    }
    per[data::class_name(c)] = e;
  }
  j["per_class"] = per;
  return j.dump(2);
}

}  // namespace histoseg::metrics
