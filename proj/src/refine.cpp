#include "histoseg/refine/refine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "histoseg/core/error.hpp"
#include "histoseg/core/interp.hpp"

namespace histoseg::refine {

std::int64_t BinaryMaskPair::fg_count() const {
  std::int64_t n = 0;
  for (double v : fg.data) n += v > 0.5;
  return n;
}

std::int64_t BinaryMaskPair::bg_count() const {
  std::int64_t n = 0;
  for (double v : bg.data) n += v > 0.5;
  return n;
}

BinaryMaskPair adaptive_threshold(const core::Tensor& cam, ThresholdConfig cfg,
                                  int class_index) {
  if (cam.rank() != 2)
    core::fail(core::Error::Kind::shape, "threshold expects an (h, w) map");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    core::fail(core::Error::Kind::argument, "refine.alpha must be in (0,1)");
  double mx = 0.0;
  for (double v : cam.data) mx = std::max(mx, v);
  BinaryMaskPair out;
  out.class_index = class_index;
  out.fg = core::Tensor::zeros(cam.shape);
  out.bg = core::Tensor::zeros(cam.shape);
  const double t = cfg.alpha * mx;
  for (size_t i = 0; i < cam.data.size(); ++i) {
    const bool fg = mx > 0.0 && cam.data[i] >= t;
    out.fg.data[i] = fg ? 1.0 : 0.0;
    out.bg.data[i] = fg ? 0.0 : 1.0;
  }
  return out;
}

std::optional<core::Tensor> region_embed(const encoders::EncoderBackend& backend,
                                         const data::RGBImage& image,
                                         const core::Tensor& mask) {
  if (mask.rank() != 2 || mask.dim(0) != image.h || mask.dim(1) != image.w)
    core::fail(core::Error::Kind::shape, "mask must match the image size");
  bool any = false;
  for (double v : mask.data) any |= v > 0.5;
  if (!any) return std::nullopt;
  data::RGBImage masked = image;
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x)
      if (mask(y, x) < 0.5)
        for (int c = 0; c < 3; ++c) masked.at(y, x, c) = 0.0;
  return backend.encode_image_global(masked);
}

MemoryBank::MemoryBank(int capacity) : capacity_(capacity) {
  if (capacity <= 0)
    core::fail(core::Error::Kind::argument, "bank capacity must be positive");
  ring_.resize(static_cast<size_t>(capacity));
}

void MemoryBank::push(const core::Tensor& v) {
  double n = 0.0;
  for (double x : v.data) n += x * x;
  if (std::abs(std::sqrt(n) - 1.0) > 1e-5)
    core::fail(core::Error::Kind::contract,
               "memory bank stores unit-norm vectors only");
  ring_[static_cast<size_t>(cursor_)] = v;
  cursor_ = (cursor_ + 1) % capacity_;
  fill_ = std::min(fill_ + 1, capacity_);
}

std::vector<core::Tensor> MemoryBank::snapshot() const {
  std::vector<core::Tensor> out;
  out.reserve(static_cast<size_t>(fill_));
  // Oldest first: when full the cursor points at the oldest slot.
  const int start = fill_ < capacity_ ? 0 : cursor_;
  for (int i = 0; i < fill_; ++i)
    out.push_back(ring_[static_cast<size_t>((start + i) % capacity_)]);
  return out;
}

void MemoryBank::restore(std::vector<core::Tensor> items, int cursor) {
  if (static_cast<int>(items.size()) > capacity_ || cursor < 0 ||
      cursor >= capacity_)
    core::fail(core::Error::Kind::argument, "bank restore state out of range");
  fill_ = static_cast<int>(items.size());
  cursor_ = fill_ < capacity_ ? fill_ : cursor;
  for (auto& slot : ring_) slot = core::Tensor();
  const int start = fill_ < capacity_ ? 0 : cursor;
  for (int i = 0; i < fill_; ++i)
    ring_[static_cast<size_t>((start + i) % capacity_)] =
        std::move(items[static_cast<size_t>(i)]);
}

core::Var infonce(core::Graph& g, const core::Tensor& query, core::Var positive,
                  const std::vector<core::Var>& negatives,
                  const std::vector<core::Tensor>& negative_consts,
                  double temperature) {
  if (!(temperature > 0))
    core::fail(core::Error::Kind::argument, "temperature must be positive");
  if (negatives.empty() && negative_consts.empty())
    return g.constant(core::Tensor::scalar(0.0));
  const double inv_t = 1.0 / temperature;
  core::Var pos_score =
      core::scale(g, core::dot_with(g, positive, query), inv_t);
  std::vector<core::Var> scores{pos_score};
  for (core::Var nvec : negatives)
    scores.push_back(core::scale(g, core::dot_with(g, nvec, query), inv_t));
  std::vector<double> const_scores;
  for (const auto& nvec : negative_consts) {
    if (nvec.numel() != query.numel())
      core::fail(core::Error::Kind::shape, "negative width mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < nvec.data.size(); ++i)
      acc += nvec.data[i] * query.data[i];
    const_scores.push_back(acc * inv_t);
  }
  core::Var all = core::concat_scalars(g, scores, const_scores);
  return core::sub(g, core::logsumexp_v(g, all), pos_score);
}

core::Var sim_loss(core::Graph& g, const std::vector<Region>& regions,
                   const protocam::PrototypeBank& bank, MemoryBank& mem,
                   double temperature) {
  const auto protos = bank.forward(g);
  const int c_total = bank.class_count();
  const std::vector<core::Tensor> bank_negs = mem.snapshot();
  core::Var bg_proto = core::l2norm_rows(g, bank.background(g), 1e-12);

  std::vector<core::Var> fg_terms, bg_terms;
  std::vector<core::Tensor> bg_embeddings;
  for (const auto& r : regions) {
    if (r.is_fg) {
      if (r.class_index < 0 || r.class_index >= c_total)
        core::fail(core::Error::Kind::argument, "region class out of range");
      core::Var pos = core::row_of(g, protos.p_tilde, r.class_index);
      std::vector<core::Var> negs;
      for (int o = 0; o < c_total; ++o)
        if (o != r.class_index) negs.push_back(core::row_of(g, protos.p_tilde, o));
      fg_terms.push_back(
          infonce(g, r.embedding, pos, negs, bank_negs, temperature));
    } else {
      core::Var pos = core::row_of(g, bg_proto, 0);
      std::vector<core::Var> negs;
      for (int o = 0; o < c_total; ++o)
        negs.push_back(core::row_of(g, protos.p_tilde, o));
      bg_terms.push_back(infonce(g, r.embedding, pos, negs, {}, temperature));
      bg_embeddings.push_back(r.embedding);
    }
  }
  core::Var loss = core::add(g, core::mean_scalars(g, fg_terms),
                             core::mean_scalars(g, bg_terms));
  // Enqueue after the loss so a region never serves as its own negative.
  for (const auto& e : bg_embeddings) mem.push(e);
  return loss;
}

std::vector<Region> extract_regions(const encoders::EncoderBackend& backend,
                                    const data::RGBImage& image,
                                    const core::Tensor& norm_cams,
                                    const std::vector<int>& labels,
                                    ThresholdConfig cfg) {
  if (norm_cams.rank() != 3)
    core::fail(core::Error::Kind::shape, "expected C x h x w normalized maps");
  const int c_total = norm_cams.dim(0);
  if (static_cast<int>(labels.size()) != c_total)
    core::fail(core::Error::Kind::shape, "label arity does not match classes");
  const int gh = norm_cams.dim(1), gw = norm_cams.dim(2);
  std::vector<Region> out;
  std::vector<double> plane(static_cast<size_t>(gh) * gw);
  for (int c = 0; c < c_total; ++c) {
    if (labels[static_cast<size_t>(c)] == 0) continue;
    for (int i = 0; i < gh * gw; ++i)
      plane[static_cast<size_t>(i)] = norm_cams.data[
          static_cast<size_t>(c) * gh * gw + static_cast<size_t>(i)];
    // Masks live at image resolution: upsample the map before thresholding.
    core::Tensor up = core::Tensor::zeros({image.h, image.w});
    core::resize_bilinear_plane(plane.data(), gh, gw, up.data.data(), image.h,
                                image.w);
    const BinaryMaskPair masks = adaptive_threshold(up, cfg, c);
    if (auto fg = region_embed(backend, image, masks.fg))
      out.push_back({std::move(*fg), c, true});
    if (auto bg = region_embed(backend, image, masks.bg))
      out.push_back({std::move(*bg), c, false});
  }
  return out;
}

core::Var total_loss(core::Graph& g, core::Var l_cls, core::Var l_struct,
                     core::Var l_sim, LossWeights w) {
  if (!(w.cls >= 0 && w.structural >= 0 && w.sim >= 0))
    core::fail(core::Error::Kind::argument, "loss weights must be >= 0");
  for (core::Var v : {l_cls, l_struct, l_sim})
    if (v->val.numel() != 1 || !std::isfinite(v->val.data[0]))
      core::fail(core::Error::Kind::contract,
                 "non-finite loss component; aborting");
  return core::add(g, core::scale(g, l_cls, w.cls),
                   core::add(g, core::scale(g, l_struct, w.structural),
                             core::scale(g, l_sim, w.sim)));
}

}  // namespace histoseg::refine
