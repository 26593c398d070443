#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "histoseg/core/error.hpp"
#include "histoseg/data/manifest.hpp"
#include "histoseg/pipeline/checkpoint.hpp"
#include "histoseg/pipeline/config.hpp"
#include "histoseg/pipeline/evaluate.hpp"
#include "histoseg/pipeline/model.hpp"
#include "histoseg/pipeline/synth.hpp"
#include "histoseg/pipeline/train.hpp"
#include "histoseg/pipeline/visualize.hpp"
#include "histoseg/protocam/prompts.hpp"

namespace {

using namespace histoseg;

std::vector<std::string> resolve_prompts(const std::string& prompt_file) {
  std::array<std::string, data::kNumClasses> arr =
      prompt_file.empty() ? protocam::default_prompts() : protocam::load_prompt_file(prompt_file);
  return {arr.begin(), arr.end()};
}

pipeline::Model model_from_checkpoint(const std::string& ckpt_path, const std::string& config_path,
                                      const std::string& prompt_file, bool no_crf, bool no_tta) {
  pipeline::RunConfig cfg =
      config_path.empty() ? pipeline::RunConfig{} : pipeline::load_config(config_path);
  if (no_crf) cfg.post.crf_enabled = false;
  if (no_tta) cfg.tta.enabled = false;

  pipeline::Model model = pipeline::build_model(cfg, resolve_prompts(prompt_file));
  pipeline::Checkpoint ckpt = pipeline::load_checkpoint(ckpt_path);
  if (ckpt.config_hash != pipeline::config_hash(cfg))
    std::cerr << "[histoseg] warning: checkpoint was written under a different configuration\n";
  pipeline::apply_checkpoint(model, ckpt);
  return model;
}

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

int run_train(const std::string& config_path, const std::string& manifest_path,
              const std::string& out_dir, const std::string& prompt_file,
              std::uint64_t seed, bool seed_set, const std::string& backend) {
  pipeline::RunConfig cfg =
      config_path.empty() ? pipeline::RunConfig{} : pipeline::load_config(config_path);
  if (seed_set) cfg.seed = seed;
  if (!backend.empty()) cfg.backend = backend;

  data::Manifest manifest = data::load_manifest(manifest_path);
  pipeline::Model model = pipeline::build_model(cfg, resolve_prompts(prompt_file));

  std::filesystem::create_directories(out_dir);
  pipeline::TrainResult result = pipeline::train(model, manifest, &std::cout);

  const std::string ckpt_path = out_dir + "/checkpoint.bin";
  pipeline::save_checkpoint(ckpt_path, result.checkpoint);
  std::ofstream(out_dir + "/config.json") << pipeline::config_to_json(cfg) << "\n";
  std::cout << "wrote " << ckpt_path << " (step " << result.checkpoint.step << ")\n";
  if (result.aborted) {
    std::cerr << "[histoseg] training aborted on a non-finite loss; checkpoint holds the last "
                 "good state\n";
    return 2;
  }
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& manifest_path,
             const std::string& config_path, const std::string& prompt_file,
             const std::string& report_path, const std::string& compare_path, bool no_crf,
             bool no_tta, bool open_set) {
  pipeline::Model model =
      model_from_checkpoint(ckpt_path, config_path, prompt_file, no_crf, no_tta);
  data::Manifest manifest = data::load_manifest(manifest_path);

  pipeline::EvalOptions opt;
  opt.use_labels = !open_set;
  opt.progress = &std::cout;
  pipeline::EvalResult res = pipeline::evaluate(model, manifest, opt);
  std::cout << metrics::format_report(res.report);
  if (res.skipped) std::cout << res.skipped << " record(s) skipped without masks\n";

  nlohmann::json out = nlohmann::json::parse(metrics::report_to_json(res.report));
  out["evaluated"] = res.evaluated;
  out["skipped"] = res.skipped;

  if (!compare_path.empty()) {
    pipeline::Model other =
        model_from_checkpoint(compare_path, config_path, prompt_file, no_crf, no_tta);
    pipeline::EvalOptions oopt;
    oopt.use_labels = !open_set;
    pipeline::EvalResult ores = pipeline::evaluate(other, manifest, oopt);
    std::cout << "\ncomparison checkpoint:\n" << metrics::format_report(ores.report);
    std::cout << "mIoU delta (primary - comparison): " << (res.report.miou - ores.report.miou)
              << "\n";
    out["comparison"] = nlohmann::json::parse(metrics::report_to_json(ores.report));
    out["miou_delta"] = res.report.miou - ores.report.miou;
  }

  if (!report_path.empty()) {
    std::ofstream f(report_path);
    if (!f) core::fail(core::Error::Kind::io, "eval: cannot write " + report_path);
    f << out.dump(2) << "\n";
    std::cout << "wrote " << report_path << "\n";
  }
  return 0;
}

int run_infer(const std::string& ckpt_path, const std::string& image_path,
              const std::string& out_dir, const std::string& config_path,
              const std::string& prompt_file, bool no_crf, bool no_tta) {
  pipeline::Model model =
      model_from_checkpoint(ckpt_path, config_path, prompt_file, no_crf, no_tta);
  data::RGBImage image = data::load_image(image_path, model.cfg.image_size);
  pipeline::Prediction pred = pipeline::predict(model, image);

  std::filesystem::create_directories(out_dir);
  const std::string mask_path = out_dir + "/" + stem_of(image_path) + "_mask.png";
  data::save_mask(mask_path, pred.mask);
  std::cout << "wrote " << mask_path << "\n";
  return 0;
}

int run_visualize(const std::string& ckpt_path, const std::vector<std::string>& images,
                  const std::string& out_dir, const std::string& config_path,
                  const std::string& prompt_file) {
  pipeline::Model model = model_from_checkpoint(ckpt_path, config_path, prompt_file, false, false);
  std::filesystem::create_directories(out_dir);
  for (const std::string& path : images) {
    data::RGBImage image = data::load_image(path, model.cfg.image_size);
    auto files = pipeline::visualize(model, image, out_dir, stem_of(path));
    for (const auto& f : files) std::cout << "wrote " << f << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised tissue segmentation toolkit"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, out_dir, prompt_file, backend;
  std::string ckpt_path, report_path, compare_path, image_path;
  std::vector<std::string> images;
  std::uint64_t seed = 0;
  bool no_crf = false, no_tta = false, open_set = false;
  int synth_count = 64, synth_size = 64;
  std::uint64_t synth_seed = 7;

  auto* train = app.add_subcommand("train", "Train adapters and prototypes");
  train->add_option("--config", config_path, "JSON config file");
  train->add_option("--manifest", manifest_path, "training manifest")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--prompts", prompt_file, "prompt override file");
  auto* seed_opt = train->add_option("--seed", seed, "run seed");
  train->add_option("--backend", backend, "encoder backend (toy|conch+segformer)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against dense masks");
  eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  eval->add_option("--manifest", manifest_path, "evaluation manifest")->required();
  eval->add_option("--config", config_path, "JSON config file");
  eval->add_option("--prompts", prompt_file, "prompt override file");
  eval->add_option("--report", report_path, "write JSON report here");
  eval->add_option("--compare", compare_path, "second checkpoint for an ablation comparison");
  eval->add_flag("--no-crf", no_crf, "skip pairwise refinement");
  eval->add_flag("--no-tta", no_tta, "skip augmentation averaging");
  eval->add_flag("--open-set", open_set, "ignore manifest labels when predicting");

  auto* infer = app.add_subcommand("infer", "Predict a mask for one image");
  infer->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  infer->add_option("--image", image_path, "input image")->required();
  infer->add_option("--out", out_dir, "output directory")->required();
  infer->add_option("--config", config_path, "JSON config file");
  infer->add_option("--prompts", prompt_file, "prompt override file");
  infer->add_flag("--no-crf", no_crf, "skip pairwise refinement");
  infer->add_flag("--no-tta", no_tta, "skip augmentation averaging");

  auto* vis = app.add_subcommand("visualize", "Write heatmaps, overlay, and stage maps");
  vis->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  vis->add_option("--images", images, "input images")->required()->expected(-1);
  vis->add_option("--out", out_dir, "output directory")->required();
  vis->add_option("--config", config_path, "JSON config file");
  vis->add_option("--prompts", prompt_file, "prompt override file");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic blob dataset");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--count", synth_count, "number of images");
  synth->add_option("--size", synth_size, "image side length");
  synth->add_option("--seed", synth_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return run_train(config_path, manifest_path, out_dir, prompt_file, seed,
                       seed_opt->count() > 0, backend);
    if (eval->parsed())
      return run_eval(ckpt_path, manifest_path, config_path, prompt_file, report_path,
                      compare_path, no_crf, no_tta, open_set);
    if (infer->parsed())
      return run_infer(ckpt_path, image_path, out_dir, config_path, prompt_file, no_crf, no_tta);
    if (vis->parsed())
      return run_visualize(ckpt_path, images, out_dir, config_path, prompt_file);
    if (synth->parsed()) {
      pipeline::SynthConfig scfg;
      scfg.count = synth_count;
      scfg.image_size = synth_size;
      scfg.seed = synth_seed;
      scfg.out_dir = out_dir;
      data::Manifest m = pipeline::synthesize_dataset(scfg);
      std::cout << "wrote " << m.records.size() << " images under " << out_dir << "\n";
      return 0;
    }
  } catch (const core::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
