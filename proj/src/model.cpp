#include "histoseg/pipeline/model.hpp"

#include <cmath>

#include "histoseg/core/error.hpp"
#include "histoseg/core/interp.hpp"
#include "histoseg/data/classes.hpp"
#include "histoseg/postprocess/postprocess.hpp"

namespace histoseg::pipeline {

Model build_model(const RunConfig& cfg, const std::vector<std::string>& prompts) {
  validate(cfg);
  Model m;
  m.cfg = cfg;
  m.prompts = prompts;
  m.backend = encoders::create_backend(cfg.backend, cfg.seed);
  const encoders::BackendInfo& info = m.backend->info();

  core::Rng rng(cfg.seed);
  encoders::AdapterConfig acfg;
  acfg.channels = info.student_channels;
  acfg.hidden = encoders::default_adapter_hidden(info.student_channels);
  m.adapters = std::make_unique<encoders::AdapterStack>(m.store, acfg, rng);

  protocam::ProtoDims dims;
  dims.n_ratio = cfg.proto_n_ratio;
  dims.logit_scale_init = cfg.logit_scale_init;
  dims.student_channels = info.student_channels;
  m.prototypes = std::make_unique<protocam::PrototypeBank>(
      protocam::init_prototypes(m.store, *m.backend, prompts, dims, rng));
  m.head = std::make_unique<protocam::CamHead>(m.store, cfg.logit_scale_init);
  m.bank = refine::MemoryBank(cfg.bank_capacity);
  return m;
}

core::Tensor raw_cams(const Model& model, const data::RGBImage& image) {
  core::Graph g;
  auto student = model.backend->student_pyramid(image);
  auto teacher = model.backend->teacher_pyramid(image);
  auto refined = encoders::adapt(g, student, encoders::pyramid_grids(teacher), *model.adapters);
  auto cams = protocam::generate_cams(g, model.prototypes->forward(g), *model.head,
                                      refined.levels.back());
  return protocam::cams_to_chw(cams);
}

std::vector<core::Tensor> stage_activation_maps(const Model& model,
                                                const data::RGBImage& image) {
  core::Graph g;
  auto student = model.backend->student_pyramid(image);
  auto teacher = model.backend->teacher_pyramid(image);
  auto refined = encoders::adapt(g, student, encoders::pyramid_grids(teacher), *model.adapters);

  std::vector<core::Tensor> maps;
  for (const core::Var& level : refined.levels) {
    const core::Tensor& f = level->val;  // (C, gh, gw)
    const int c = f.dim(0), gh = f.dim(1), gw = f.dim(2);
    core::Tensor m = core::Tensor::zeros({gh, gw});
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x) {
        double acc = 0.0;
        for (int k = 0; k < c; ++k) acc += std::abs(f(k, y, x));
        m(y, x) = acc / c;
      }
    double lo = m.data[0], hi = m.data[0];
    for (double v : m.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > 1e-12)
      for (double& v : m.data) v = (v - lo) / (hi - lo);
    else
      for (double& v : m.data) v = 0.0;
    maps.push_back(std::move(m));
  }
  return maps;
}

Prediction predict(const Model& model, const data::RGBImage& image,
                   const std::vector<int>& labels) {
  auto forward = [&model](const data::RGBImage& im) { return raw_cams(model, im); };
  core::Tensor averaged = postprocess::tta_cams(forward, image, model.cfg.tta);

  core::Tensor norm = protocam::normalize_cams(averaged, labels);
  core::Tensor up = core::resize_bilinear_chw(norm, image.h, image.w);

  Prediction out;
  out.norm_cams = up;
  out.probabilities = postprocess::assemble_probabilities(up, model.cfg.post);
  if (model.cfg.post.crf_enabled) {
    out.mask = postprocess::dense_crf(
        postprocess::make_crf_problem(out.probabilities, image, model.cfg.crf));
  } else {
    out.mask = postprocess::argmax_mask(out.probabilities);
  }
  return out;
}

Prediction predict(const Model& model, const data::RGBImage& image) {
  return predict(model, image, std::vector<int>(data::kNumClasses, 1));
}

}  // namespace histoseg::pipeline
