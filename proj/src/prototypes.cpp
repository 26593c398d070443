#include "histoseg/protocam/prototypes.hpp"

#include <cmath>
#include <string>

#include "histoseg/core/error.hpp"
#include "histoseg/data/classes.hpp"

namespace histoseg::protocam {

PrototypeBank::PrototypeBank(core::ParamStore& store, core::Tensor text_embeddings,
                             ProtoDims dims, core::Rng& rng)
    : text_(std::move(text_embeddings)), dims_(dims) {
  if (text_.rank() != 2 || text_.dim(1) != dims_.d_text)
    core::fail(core::Error::Kind::shape, "text embeddings must be C x d_text");
  if (dims_.d_proto != dims_.d_text)
    core::fail(core::Error::Kind::argument,
               "d_proto must equal d_text (residual projection)");
  if (dims_.student_channels < dims_.d_proto)
    core::fail(core::Error::Kind::argument,
               "student_channels must be >= d_proto (padded skip)");
  if (dims_.n_ratio < 1)
    core::fail(core::Error::Kind::argument, "proto.n_ratio must be >= 1");
  const int dh = dims_.n_ratio * dims_.d_proto;   // projection hidden
  const int da = 2 * dims_.d_proto;               // adaptive hidden
  const double s_t = 1.0 / std::sqrt(static_cast<double>(dims_.d_text));
  const double s_p = 1.0 / std::sqrt(static_cast<double>(dims_.d_proto));
  proj1_w_ = &store.create("proto.proj1.w", core::randn({dh, dims_.d_text}, rng, s_t));
  proj1_b_ = &store.create("proto.proj1.b", core::Tensor::zeros({dh}));
  proj2_w_ = &store.create("proto.proj2.w", core::Tensor::zeros({dims_.d_proto, dh}));
  proj2_b_ = &store.create("proto.proj2.b", core::Tensor::zeros({dims_.d_proto}));
  adapt1_w_ = &store.create("proto.adapt1.w", core::randn({da, dims_.d_proto}, rng, s_p));
  adapt1_b_ = &store.create("proto.adapt1.b", core::Tensor::zeros({da}));
  adapt2_w_ = &store.create("proto.adapt2.w",
                            core::Tensor::zeros({dims_.student_channels, da}));
  adapt2_b_ = &store.create("proto.adapt2.b",
                            core::Tensor::zeros({dims_.student_channels}));
  bg_ = &store.create("proto.bg", core::randn({1, dims_.d_proto}, rng, s_p));
}

PrototypeForward PrototypeBank::forward(core::Graph& g) const {
  core::Var t = g.constant(text_);
  // p' = t + MLP(t); zero-init second layer makes this the identity at init.
  core::Var h = core::gelu(
      g, core::linear(g, t, g.param(*proj1_w_), g.param(*proj1_b_)));
  core::Var p_raw =
      core::add(g, t, core::linear(g, h, g.param(*proj2_w_), g.param(*proj2_b_)));
  PrototypeForward out;
  out.p_tilde = core::l2norm_rows(g, p_raw, 1e-12);
  // Adaptive stage: zero-padded skip into the visual width plus a residual
  // MLP whose second layer starts at zero.
  core::Var a = core::gelu(
      g, core::linear(g, out.p_tilde, g.param(*adapt1_w_), g.param(*adapt1_b_)));
  core::Var skip = core::pad_cols(g, out.p_tilde, dims_.student_channels);
  out.p4 = core::add(
      g, skip, core::linear(g, a, g.param(*adapt2_w_), g.param(*adapt2_b_)));
  return out;
}

core::Var PrototypeBank::background(core::Graph& g) const {
  return g.param(*bg_);
}

PrototypeBank init_prototypes(core::ParamStore& store,
                              const encoders::EncoderBackend& backend,
                              const std::vector<std::string>& prompts,
                              ProtoDims dims, core::Rng& rng) {
  if (static_cast<int>(prompts.size()) != data::kNumClasses)
    core::fail(core::Error::Kind::argument,
               "expected " + std::to_string(data::kNumClasses) +
                   " class prompts, got " + std::to_string(prompts.size()));
  core::Tensor text = core::Tensor::zeros(
      {static_cast<int>(prompts.size()), backend.info().text_dim});
  for (size_t c = 0; c < prompts.size(); ++c) {
    const core::Tensor t = backend.encode_text(prompts[c]);
    for (int d = 0; d < backend.info().text_dim; ++d)
      text(static_cast<int>(c), d) = t.data[static_cast<size_t>(d)];
  }
  dims.d_text = backend.info().text_dim;
  dims.d_proto = backend.info().text_dim;
  return PrototypeBank(store, std::move(text), dims, rng);
}

CamHead::CamHead(core::ParamStore& store, double init) {
  if (!(init > 0))
    core::fail(core::Error::Kind::argument, "logit scale init must be > 0");
  tau_ = &store.create("proto.logit_scale", core::Tensor::scalar(init));
}

core::Var CamHead::logit_scale(core::Graph& g) const {
  return core::clamp_v(g, g.param(*tau_), 1.0, 100.0);
}

double CamHead::value() const { return tau_->value.data[0]; }

CamSet generate_cams(core::Graph& g, const PrototypeForward& protos,
                     const CamHead& head, core::Var refined_level4) {
  if (refined_level4->val.rank() != 3)
    core::fail(core::Error::Kind::shape, "refined level-4 features must be CHW");
  if (refined_level4->val.dim(0) != protos.p4->val.dim(1))
    core::fail(core::Error::Kind::shape,
               "prototype width " + std::to_string(protos.p4->val.dim(1)) +
                   " does not match feature channels " +
                   std::to_string(refined_level4->val.dim(0)));
  CamSet out;
  out.grid_h = refined_level4->val.dim(1);
  out.grid_w = refined_level4->val.dim(2);
  core::Var tokens =
      core::l2norm_rows(g, core::chw_to_tokens(g, refined_level4), 1e-12);
  core::Var p4n = core::l2norm_rows(g, protos.p4, 1e-12);
  core::Var cos = core::matmul(g, tokens, core::transpose2(g, p4n));
  out.scores = core::scale_by(g, cos, head.logit_scale(g));
  return out;
}

core::Var classification_loss(core::Graph& g, const CamSet& cams,
                              const std::vector<int>& labels) {
  const int c = cams.scores->val.dim(1);
  if (static_cast<int>(labels.size()) != c)
    core::fail(core::Error::Kind::shape, "label arity does not match classes");
  core::Tensor y = core::Tensor::zeros({c});
  for (int i = 0; i < c; ++i) {
    if (labels[static_cast<size_t>(i)] != 0 && labels[static_cast<size_t>(i)] != 1)
      core::fail(core::Error::Kind::argument, "labels must be 0/1");
    y.data[static_cast<size_t>(i)] = labels[static_cast<size_t>(i)];
  }
  return core::bce_logits(g, core::col_mean(g, cams.scores), y);
}

core::Tensor cams_to_chw(const CamSet& cams) {
  const int n = cams.scores->val.dim(0);
  const int c = cams.scores->val.dim(1);
  if (n != cams.grid_h * cams.grid_w)
    core::fail(core::Error::Kind::shape, "cam grid metadata inconsistent");
  core::Tensor out = core::Tensor::zeros({c, cams.grid_h, cams.grid_w});
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < c; ++k)
      out(k, i / cams.grid_w, i % cams.grid_w) = cams.scores->val(i, k);
  return out;
}

core::Tensor normalize_cams(const core::Tensor& cams_chw,
                            const std::vector<int>& labels) {
  if (cams_chw.rank() != 3)
    core::fail(core::Error::Kind::shape, "expected C x H x W maps");
  const int c = cams_chw.dim(0), h = cams_chw.dim(1), w = cams_chw.dim(2);
  if (static_cast<int>(labels.size()) != c)
    core::fail(core::Error::Kind::shape, "label arity does not match classes");
  core::Tensor out = core::Tensor::zeros({c, h, w});
  for (int k = 0; k < c; ++k) {
    if (labels[static_cast<size_t>(k)] == 0) continue;  // absent class: zeros
    double lo = cams_chw(k, 0, 0), hi = lo;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        lo = std::min(lo, cams_chw(k, y, x));
        hi = std::max(hi, cams_chw(k, y, x));
      }
    if (hi - lo < 1e-12) continue;  // constant map: zeros by convention
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out(k, y, x) = (cams_chw(k, y, x) - lo) / (hi - lo);
  }
  return out;
}

}  // namespace histoseg::protocam
