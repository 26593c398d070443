#include "histoseg/pipeline/train.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

#include "histoseg/core/error.hpp"
#include "histoseg/distill/distill.hpp"

namespace histoseg::pipeline {

StepLosses train_step(Model& model, AdamW& opt, const std::vector<TrainSample>& batch) {
  if (batch.empty()) core::fail(core::Error::Kind::argument, "train_step: empty batch");

  core::Graph g;
  protocam::PrototypeForward protos = model.prototypes->forward(g);

  std::vector<core::Var> cls_terms, struct_terms, sim_terms;
  for (const TrainSample& sample : batch) {
    auto student = model.backend->student_pyramid(sample.image);
    auto teacher = model.backend->teacher_pyramid(sample.image);
    auto refined =
        encoders::adapt(g, student, encoders::pyramid_grids(teacher), *model.adapters);

    auto cams = protocam::generate_cams(g, protos, *model.head, refined.levels.back());
    cls_terms.push_back(protocam::classification_loss(g, cams, sample.labels));
    struct_terms.push_back(distill::struct_loss(g, refined, teacher, model.cfg.distill_cfg));

    core::Tensor norm = protocam::normalize_cams(protocam::cams_to_chw(cams), sample.labels);
    refine::ThresholdConfig tcfg;
    tcfg.alpha = model.cfg.refine_alpha;
    auto regions =
        refine::extract_regions(*model.backend, sample.image, norm, sample.labels, tcfg);
    sim_terms.push_back(refine::sim_loss(g, regions, *model.prototypes, model.bank,
                                         model.cfg.refine_temperature));
  }

  core::Var l_cls = core::mean_scalars(g, cls_terms);
  core::Var l_struct = core::mean_scalars(g, struct_terms);
  core::Var l_sim = core::mean_scalars(g, sim_terms);

  StepLosses out;
  out.cls = l_cls->val.data[0];
  out.structural = l_struct->val.data[0];
  out.sim = l_sim->val.data[0];
  if (!std::isfinite(out.cls) || !std::isfinite(out.structural) || !std::isfinite(out.sim)) {
    out.finite = false;
    out.total = out.cls + out.structural + out.sim;
    return out;
  }

  core::Var total = refine::total_loss(g, l_cls, l_struct, l_sim, model.cfg.loss);
  out.total = total->val.data[0];

  model.store.zero_grads();
  g.backward(total);
  out.grad_norm = opt.step(model.store);
  model.store.zero_grads();
  return out;
}

namespace {

TrainSample load_sample(const data::Manifest& manifest, const data::Record& rec, int image_size) {
  TrainSample s;
  s.image = data::load_image(manifest.resolve(rec.image), image_size);
  s.labels.assign(rec.labels.begin(), rec.labels.end());
  return s;
}

}  // namespace

TrainResult train(Model& model, const data::Manifest& manifest, std::ostream* log) {
  if (manifest.records.empty())
    core::fail(core::Error::Kind::argument, "train: manifest has no records");

  AdamWConfig ocfg;
  ocfg.lr = model.cfg.learning_rate;
  ocfg.weight_decay = model.cfg.weight_decay;
  AdamW opt(ocfg);

  TrainResult result;
  result.checkpoint = snapshot_model(model, 0);

  const int n = static_cast<int>(manifest.records.size());
  const int steps_per_epoch = (n + model.cfg.batch_size - 1) / model.cfg.batch_size;
  std::int64_t global_step = 0;

  for (int epoch = 0; epoch < model.cfg.epochs; ++epoch) {
    // Epoch-keyed shuffle: reproducible for a given run seed, different
    // across epochs.
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    core::Rng shuffle_rng(model.cfg.seed ^
                          (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch + 1)));
    for (int i = n - 1; i > 0; --i) {
      int j = shuffle_rng.uniform_int(i + 1);
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    for (int start = 0; start < n; start += model.cfg.batch_size) {
      std::vector<TrainSample> batch;
      for (int i = start; i < std::min(n, start + model.cfg.batch_size); ++i)
        batch.push_back(load_sample(manifest, manifest.records[static_cast<size_t>(order[static_cast<size_t>(i)])],
                                    model.cfg.image_size));

      StepLosses losses = train_step(model, opt, batch);
      ++global_step;
      if (log) {
        *log << "epoch " << (epoch + 1) << "/" << model.cfg.epochs << " step "
             << ((start / model.cfg.batch_size) + 1) << "/" << steps_per_epoch << " cls "
             << losses.cls << " struct " << losses.structural << " sim " << losses.sim
             << " total " << losses.total << " gnorm " << losses.grad_norm << "\n";
      }
      if (!losses.finite) {
        if (log)
          *log << "non-finite loss at step " << global_step
               << "; stopping and keeping the last good state\n";
        result.history.push_back(losses);
        result.aborted = true;
        result.steps = global_step - 1;
        return result;
      }
      result.history.push_back(losses);
      result.checkpoint = snapshot_model(model, global_step);
    }
  }
  result.steps = global_step;
  return result;
}

}  // namespace histoseg::pipeline
