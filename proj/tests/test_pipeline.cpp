#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "histoseg/core/error.hpp"
#include "histoseg/data/image.hpp"
#include "histoseg/data/manifest.hpp"
#include "histoseg/pipeline/checkpoint.hpp"
#include "histoseg/pipeline/config.hpp"
#include "histoseg/pipeline/evaluate.hpp"
#include "histoseg/pipeline/model.hpp"
#include "histoseg/pipeline/optim.hpp"
#include "histoseg/pipeline/synth.hpp"
#include "histoseg/pipeline/train.hpp"
#include "histoseg/pipeline/visualize.hpp"
#include "histoseg/protocam/prompts.hpp"
#include "support/fixtures.hpp"

using namespace histoseg;

namespace {

std::vector<std::string> default_prompt_vec() {
  auto arr = protocam::default_prompts();
  return {arr.begin(), arr.end()};
}

pipeline::RunConfig small_cfg(int image_size, std::uint64_t seed) {
  pipeline::RunConfig cfg;
  cfg.backend = "toy";
  cfg.image_size = image_size;
  cfg.seed = seed;
  return cfg;
}

core::Error::Kind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const core::Error& e) {
    return e.kind();
  }
  FAIL("expected a histoseg error");
  return core::Error::Kind::argument;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<pipeline::TrainSample> samples_from(const data::Manifest& m, int image_size,
                                                int count) {
  std::vector<pipeline::TrainSample> out;
  for (int i = 0; i < count; ++i) {
    const auto& rec = m.records[static_cast<size_t>(i)];
    pipeline::TrainSample s;
    s.image = data::load_image(m.resolve(rec.image), image_size);
    s.labels.assign(rec.labels.begin(), rec.labels.end());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("config defaults survive an empty document") {
  pipeline::RunConfig cfg = pipeline::parse_config("{}");
  CHECK(cfg.epochs == 2);
  CHECK(cfg.learning_rate == doctest::Approx(2e-5));
  CHECK(cfg.weight_decay == doctest::Approx(0.001));
  CHECK(cfg.batch_size == 10);
  CHECK(cfg.image_size == 224);
  CHECK(cfg.backend == "toy");
  CHECK(cfg.loss.cls == doctest::Approx(1.0));
  CHECK(cfg.loss.structural == doctest::Approx(1.5));
  CHECK(cfg.loss.sim == doctest::Approx(0.2));
  CHECK(cfg.distill_cfg.weight == doctest::Approx(1.5));
  CHECK(cfg.distill_cfg.layers == std::vector<int>{2});
  CHECK(cfg.logit_scale_init == doctest::Approx(1.0 / 0.07));
  CHECK(cfg.refine_alpha == doctest::Approx(0.5));
  CHECK(cfg.bank_capacity == 2048);
  CHECK(cfg.post.bg_exponent == doctest::Approx(10.0));
  CHECK(cfg.post.crf_enabled);
  CHECK(cfg.tta.enabled);
  CHECK(pipeline::config_hash(cfg) == pipeline::config_hash(pipeline::RunConfig{}));
}

TEST_CASE("config json round trip is exact") {
  pipeline::RunConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 1e-4;
  cfg.batch_size = 4;
  cfg.seed = 99;
  cfg.image_size = 64;
  cfg.distill_cfg.layers = {1, 2};
  cfg.loss.structural = 0.8;
  cfg.distill_cfg.weight = 0.8;
  cfg.crf.w1 = 12.5;
  cfg.crf.iterations = 3;
  cfg.tta.enabled = false;
  cfg.post.crf_enabled = false;
  cfg.post.bg_exponent = 6.0;

  pipeline::RunConfig back = pipeline::parse_config(pipeline::config_to_json(cfg));
  CHECK(pipeline::config_hash(back) == pipeline::config_hash(cfg));
  CHECK(back.epochs == 3);
  CHECK(back.distill_cfg.layers == std::vector<int>{1, 2});
  CHECK(back.loss.structural == doctest::Approx(0.8));
  CHECK_FALSE(back.tta.enabled);
  CHECK_FALSE(back.post.crf_enabled);
}

TEST_CASE("config rejects unknown keys and bad types") {
  CHECK(kind_of([] { pipeline::parse_config(R"({"optimizer": {}})"); }) ==
        core::Error::Kind::schema);
  CHECK(kind_of([] { pipeline::parse_config(R"({"train": {"epoch": 1}})"); }) ==
        core::Error::Kind::schema);
  CHECK(kind_of([] { pipeline::parse_config(R"({"train": {"epochs": "two"}})"); }) ==
        core::Error::Kind::schema);
  CHECK(kind_of([] { pipeline::parse_config(R"({"tta": {"enabled": 1}})"); }) ==
        core::Error::Kind::schema);
  CHECK(kind_of([] { pipeline::parse_config("[1,2]"); }) == core::Error::Kind::schema);
  CHECK(kind_of([] { pipeline::parse_config("not json"); }) == core::Error::Kind::schema);
}

TEST_CASE("distill weight and struct weight are one knob") {
  pipeline::RunConfig a = pipeline::parse_config(R"({"distill": {"weight": 2.0}})");
  CHECK(a.loss.structural == doctest::Approx(2.0));
  CHECK(a.distill_cfg.weight == doctest::Approx(2.0));

  pipeline::RunConfig b = pipeline::parse_config(R"({"loss": {"struct": 0.7}})");
  CHECK(b.distill_cfg.weight == doctest::Approx(0.7));

  CHECK(kind_of([] {
          pipeline::parse_config(R"({"distill": {"weight": 1.0}, "loss": {"struct": 2.0}})");
        }) == core::Error::Kind::schema);

  pipeline::RunConfig c =
      pipeline::parse_config(R"({"distill": {"weight": 0.5}, "loss": {"struct": 0.5}})");
  CHECK(c.loss.structural == doctest::Approx(0.5));
}

TEST_CASE("config validation bounds") {
  CHECK(kind_of([] { pipeline::parse_config(R"({"train": {"epochs": 0}})"); }) ==
        core::Error::Kind::argument);
  CHECK(kind_of([] { pipeline::parse_config(R"({"refine": {"alpha": 1.5}})"); }) ==
        core::Error::Kind::argument);
  CHECK(kind_of([] { pipeline::parse_config(R"({"post": {"bg_exponent": -1.0}})"); }) ==
        core::Error::Kind::argument);
  CHECK(kind_of([] { pipeline::parse_config(R"({"loss": {"sim": -0.1}})"); }) ==
        core::Error::Kind::argument);
}

TEST_CASE("config hash tracks content") {
  pipeline::RunConfig a, b;
  CHECK(pipeline::config_hash(a) == pipeline::config_hash(b));
  b.epochs = 5;
  CHECK(pipeline::config_hash(a) != pipeline::config_hash(b));
}

TEST_CASE("adamw first step matches the closed form") {
  core::ParamStore store;
  core::Param& w = store.create("w", core::Tensor::scalar(1.0));
  w.grad = core::Tensor::scalar(0.5);

  pipeline::AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.01;
  cfg.clip_norm = 0.0;
  pipeline::AdamW opt(cfg);
  const double norm = opt.step(store);

  CHECK(norm == doctest::Approx(0.5));
  // mhat = 0.5, vhat = 0.25; w -= lr * (0.5 / (0.5 + eps) + wd * w)
  CHECK(w.value.data[0] == doctest::Approx(0.899000002).epsilon(1e-9));
  CHECK(opt.steps() == 1);
}

TEST_CASE("adamw decay works without any gradient signal") {
  core::ParamStore store;
  core::Param& w = store.create("w", core::Tensor::scalar(1.0));

  pipeline::AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.01;
  pipeline::AdamW opt(cfg);
  const double norm = opt.step(store);

  CHECK(norm == doctest::Approx(0.0));
  CHECK(w.value.data[0] == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("adamw clips by global norm and reports the raw norm") {
  core::ParamStore store;
  core::Param& a = store.create("a", core::Tensor::scalar(0.0));
  core::Param& b = store.create("b", core::Tensor::scalar(0.0));
  a.grad = core::Tensor::scalar(3.0);
  b.grad = core::Tensor::scalar(4.0);

  pipeline::AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  cfg.eps = 1.0;  // large eps makes the update clip-sensitive on step one
  cfg.clip_norm = 1.0;
  pipeline::AdamW opt(cfg);
  const double norm = opt.step(store);

  CHECK(norm == doctest::Approx(5.0));
  // clipped grads 0.6 and 0.8; update = lr * g / (|g| + 1)
  CHECK(a.value.data[0] == doctest::Approx(-0.1 * 0.6 / 1.6).epsilon(1e-12));
  CHECK(b.value.data[0] == doctest::Approx(-0.1 * 0.8 / 1.8).epsilon(1e-12));
}

TEST_CASE("adamw validates its configuration") {
  pipeline::AdamWConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(pipeline::AdamW{bad}, core::Error);
  bad = {};
  bad.beta2 = 1.0;
  CHECK_THROWS_AS(pipeline::AdamW{bad}, core::Error);
}

TEST_CASE("the parameter store holds adapters and prototypes only") {
  pipeline::Model model = pipeline::build_model(small_cfg(32, 3), default_prompt_vec());
  REQUIRE(model.store.items().size() > 0);
  for (const auto& p : model.store.items()) {
    const bool known = p->name.rfind("adapter", 0) == 0 || p->name.rfind("proto.", 0) == 0;
    CHECK_MESSAGE(known, "unexpected trainable: ", p->name);
  }
  CHECK(model.store.find("proto.logit_scale") != nullptr);
}

TEST_CASE("checkpoints round trip through disk") {
  testsupport::TempDir tmp;
  pipeline::SynthConfig scfg;
  scfg.count = 2;
  scfg.image_size = 32;
  scfg.seed = 21;
  scfg.out_dir = tmp.file("data");
  data::Manifest manifest = pipeline::synthesize_dataset(scfg);

  pipeline::Model model = pipeline::build_model(small_cfg(32, 5), default_prompt_vec());
  pipeline::AdamWConfig ocfg;
  ocfg.lr = 1e-3;
  pipeline::AdamW opt(ocfg);
  auto batch = samples_from(manifest, 32, 2);
  pipeline::StepLosses losses = pipeline::train_step(model, opt, batch);
  REQUIRE(losses.finite);
  REQUIRE(model.bank.fill() > 0);  // background embeddings entered the bank

  pipeline::Checkpoint ckpt = pipeline::snapshot_model(model, 7);
  const std::string p1 = tmp.file("a.bin");
  pipeline::save_checkpoint(p1, ckpt);
  pipeline::Checkpoint loaded = pipeline::load_checkpoint(p1);

  CHECK(loaded.step == 7);
  CHECK(loaded.config_hash == pipeline::config_hash(model.cfg));
  CHECK(loaded.tensors.size() == ckpt.tensors.size());
  CHECK(loaded.bank_items.size() == ckpt.bank_items.size());
  CHECK(loaded.bank_cursor == ckpt.bank_cursor);
  CHECK(loaded.bank_capacity == ckpt.bank_capacity);

  // One float32 quantization, byte-stable afterwards.
  const std::string p2 = tmp.file("b.bin");
  pipeline::save_checkpoint(p2, loaded);
  CHECK(file_bytes(p1) == file_bytes(p2));

  pipeline::Model fresh = pipeline::build_model(small_cfg(32, 5), default_prompt_vec());
  pipeline::apply_checkpoint(fresh, loaded);
  CHECK(fresh.bank.fill() == model.bank.fill());

  core::Tensor before = pipeline::raw_cams(model, batch[0].image);
  core::Tensor after = pipeline::raw_cams(fresh, batch[0].image);
  REQUIRE(before.shape == after.shape);
  for (size_t i = 0; i < before.data.size(); ++i)
    CHECK(std::abs(before.data[i] - after.data[i]) <=
          1e-6 * std::max(1.0, std::abs(before.data[i])));
}

TEST_CASE("checkpoint apply rejects mismatched state") {
  pipeline::Model model = pipeline::build_model(small_cfg(32, 5), default_prompt_vec());
  pipeline::Checkpoint good = pipeline::snapshot_model(model, 0);

  pipeline::Checkpoint renamed = good;
  renamed.tensors[0].first += "_zzz";
  CHECK(kind_of([&] { pipeline::apply_checkpoint(model, renamed); }) ==
        core::Error::Kind::argument);

  pipeline::Checkpoint reshaped = good;
  reshaped.tensors[0].second = core::Tensor::zeros({1});
  CHECK(kind_of([&] { pipeline::apply_checkpoint(model, reshaped); }) ==
        core::Error::Kind::shape);

  pipeline::Checkpoint shorter = good;
  shorter.tensors.pop_back();
  CHECK(kind_of([&] { pipeline::apply_checkpoint(model, shorter); }) ==
        core::Error::Kind::argument);
}

TEST_CASE("corrupt checkpoint files fail loudly") {
  testsupport::TempDir tmp;
  const std::string bad = tmp.file("junk.bin");
  testsupport::write_text(bad, "this is not a checkpoint");
  CHECK(kind_of([&] { pipeline::load_checkpoint(bad); }) == core::Error::Kind::io);

  pipeline::Model model = pipeline::build_model(small_cfg(32, 1), default_prompt_vec());
  const std::string p = tmp.file("ok.bin");
  pipeline::save_checkpoint(p, pipeline::snapshot_model(model, 0));
  std::string bytes = file_bytes(p);
  std::ofstream(tmp.file("cut.bin"), std::ios::binary) << bytes.substr(0, 20);
  CHECK(kind_of([&] { pipeline::load_checkpoint(tmp.file("cut.bin")); }) ==
        core::Error::Kind::io);

  CHECK(kind_of([&] { pipeline::load_checkpoint(tmp.file("absent.bin")); }) ==
        core::Error::Kind::io);
}

TEST_CASE("a fixed batch overfits step by step") {
  testsupport::TempDir tmp;
  pipeline::SynthConfig scfg;
  scfg.count = 2;
  scfg.image_size = 64;
  scfg.seed = 4;
  scfg.out_dir = tmp.file("data");
  data::Manifest manifest = pipeline::synthesize_dataset(scfg);

  pipeline::RunConfig cfg = small_cfg(64, 9);
  cfg.loss.sim = 0.0;  // keep the objective deterministic given the parameters
  pipeline::Model model = pipeline::build_model(cfg, default_prompt_vec());

  pipeline::AdamWConfig ocfg;
  ocfg.lr = 1e-3;
  ocfg.weight_decay = 0.0;
  pipeline::AdamW opt(ocfg);

  auto batch = samples_from(manifest, 64, 2);
  std::vector<double> totals;
  for (int step = 0; step < 20; ++step) {
    pipeline::StepLosses losses = pipeline::train_step(model, opt, batch);
    REQUIRE(losses.finite);
    CHECK(losses.grad_norm > 0.0);
    totals.push_back(losses.total);
  }
  for (size_t i = 1; i < totals.size(); ++i) CHECK(totals[i] < totals[i - 1]);
  CHECK(totals.back() < totals.front());
}

TEST_CASE("training leaves the frozen towers untouched") {
  testsupport::TempDir tmp;
  pipeline::SynthConfig scfg;
  scfg.count = 2;
  scfg.image_size = 32;
  scfg.seed = 13;
  scfg.out_dir = tmp.file("data");
  data::Manifest manifest = pipeline::synthesize_dataset(scfg);

  pipeline::Model model = pipeline::build_model(small_cfg(32, 2), default_prompt_vec());
  auto batch = samples_from(manifest, 32, 2);

  auto stud0 = model.backend->student_pyramid(batch[0].image);
  auto teach0 = model.backend->teacher_pyramid(batch[0].image);

  pipeline::AdamWConfig ocfg;
  ocfg.lr = 1e-3;
  pipeline::AdamW opt(ocfg);
  for (int i = 0; i < 3; ++i) (void)pipeline::train_step(model, opt, batch);

  auto stud1 = model.backend->student_pyramid(batch[0].image);
  auto teach1 = model.backend->teacher_pyramid(batch[0].image);
  REQUIRE(stud0.levels.size() == stud1.levels.size());
  for (size_t k = 0; k < stud0.levels.size(); ++k) {
    CHECK(stud0.levels[k].data == stud1.levels[k].data);
    CHECK(teach0.levels[k].data == teach1.levels[k].data);
  }
}

TEST_CASE("training runs are reproducible end to end") {
  testsupport::TempDir tmp;
  pipeline::SynthConfig scfg;
  scfg.count = 6;
  scfg.image_size = 64;
  scfg.seed = 17;
  scfg.out_dir = tmp.file("data");
  data::Manifest manifest = pipeline::synthesize_dataset(scfg);

  pipeline::RunConfig cfg = small_cfg(64, 11);
  cfg.epochs = 1;
  cfg.batch_size = 3;

  pipeline::Model a = pipeline::build_model(cfg, default_prompt_vec());
  pipeline::TrainResult ra = pipeline::train(a, manifest, nullptr);
  pipeline::save_checkpoint(tmp.file("a.bin"), ra.checkpoint);

  pipeline::Model b = pipeline::build_model(cfg, default_prompt_vec());
  pipeline::TrainResult rb = pipeline::train(b, manifest, nullptr);
  pipeline::save_checkpoint(tmp.file("b.bin"), rb.checkpoint);

  CHECK(ra.steps == 2);
  CHECK(ra.checkpoint.step == 2);
  CHECK_FALSE(ra.aborted);
  REQUIRE(ra.history.size() == rb.history.size());
  for (size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].total == rb.history[i].total);
    CHECK(ra.history[i].grad_norm == rb.history[i].grad_norm);
  }
  CHECK(file_bytes(tmp.file("a.bin")) == file_bytes(tmp.file("b.bin")));
}

TEST_CASE("training aborts on a poisoned parameter and keeps the last good state") {
  testsupport::TempDir tmp;
  pipeline::SynthConfig scfg;
  scfg.count = 2;
  scfg.image_size = 32;
  scfg.seed = 23;
  scfg.out_dir = tmp.file("data");
  data::Manifest manifest = pipeline::synthesize_dataset(scfg);

  pipeline::RunConfig cfg = small_cfg(32, 7);
  cfg.epochs = 1;
  cfg.batch_size = 2;
  pipeline::Model model = pipeline::build_model(cfg, default_prompt_vec());
  core::Param* tau = model.store.find("proto.logit_scale");
  REQUIRE(tau != nullptr);
  tau->value.data[0] = std::numeric_limits<double>::quiet_NaN();

  std::ostringstream log;
  pipeline::TrainResult r = pipeline::train(model, manifest, &log);
  CHECK(r.aborted);
  CHECK(r.steps == 0);
  CHECK(r.checkpoint.step == 0);
  REQUIRE(r.history.size() == 1);
  CHECK_FALSE(r.history.back().finite);
  CHECK(log.str().find("non-finite") != std::string::npos);
}

TEST_CASE("evaluate scores a ground-truth oracle at one") {
  testsupport::TempDir tmp;
  pipeline::SynthConfig scfg;
  scfg.count = 6;
  scfg.image_size = 64;
  scfg.seed = 31;
  scfg.out_dir = tmp.file("data");
  data::Manifest manifest = pipeline::synthesize_dataset(scfg);

  pipeline::Model model = pipeline::build_model(small_cfg(64, 1), default_prompt_vec());
  pipeline::EvalOptions opt;
  opt.predictor = [&manifest](const data::Record& rec, const data::RGBImage&) {
    return data::load_mask(manifest.resolve(*rec.mask));
  };
  pipeline::EvalResult res = pipeline::evaluate(model, manifest, opt);
  CHECK(res.evaluated == 6);
  CHECK(res.skipped == 0);
  CHECK(res.report.miou == doctest::Approx(1.0));
  CHECK(res.report.mdice == doctest::Approx(1.0));
  CHECK(res.report.pixel_accuracy == doctest::Approx(1.0));
}

TEST_CASE("evaluate resizes mismatched ground truth and counts skips") {
  testsupport::TempDir tmp;
  pipeline::SynthConfig scfg;
  scfg.count = 2;
  scfg.image_size = 64;
  scfg.seed = 37;
  scfg.out_dir = tmp.file("data");
  data::Manifest manifest = pipeline::synthesize_dataset(scfg);
  manifest.records[1].mask.reset();  // second record loses its ground truth

  pipeline::Model model = pipeline::build_model(small_cfg(32, 1), default_prompt_vec());
  pipeline::EvalOptions opt;
  opt.predictor = [](const data::Record&, const data::RGBImage& img) {
    data::SegmentationMask m;
    m.h = img.h;
    m.w = img.w;
    m.labels.assign(static_cast<size_t>(img.h) * img.w, data::kBackgroundLabel);
    return m;
  };
  pipeline::EvalResult res = pipeline::evaluate(model, manifest, opt);
  CHECK(res.evaluated == 1);
  CHECK(res.skipped == 1);
  CHECK(res.report.pixels == 32 * 32);  // 64px ground truth landed on the 32px grid

  data::Manifest empty;
  CHECK(kind_of([&] { pipeline::evaluate(model, empty, opt); }) == core::Error::Kind::argument);

  data::Manifest maskless = manifest;
  maskless.records[0].mask.reset();
  CHECK(kind_of([&] { pipeline::evaluate(model, maskless, opt); }) ==
        core::Error::Kind::argument);
}

TEST_CASE("visualization writes a deterministic set of maps") {
  testsupport::TempDir tmp;
  pipeline::RunConfig cfg = small_cfg(32, 2);
  cfg.post.crf_enabled = false;
  pipeline::Model model = pipeline::build_model(cfg, default_prompt_vec());

  // Plain background everywhere: constant maps normalize to zero, so the
  // prediction is background and the overlay reproduces the input.
  data::RGBImage image = data::RGBImage::filled(32, 32, 0.94, 0.90, 0.93);

  std::filesystem::create_directories(tmp.file("v1"));
  std::filesystem::create_directories(tmp.file("v2"));
  auto files1 = pipeline::visualize(model, image, tmp.file("v1"), "img");
  auto files2 = pipeline::visualize(model, image, tmp.file("v2"), "img");
  REQUIRE(files1.size() == 9);  // 4 class maps + overlay + 4 stage maps
  REQUIRE(files2.size() == 9);
  for (size_t i = 0; i < files1.size(); ++i) {
    CHECK(std::filesystem::exists(files1[i]));
    CHECK(file_bytes(files1[i]) == file_bytes(files2[i]));
  }

  const std::string ref = tmp.file("ref.png");
  data::save_image(ref, image);
  CHECK(file_bytes(tmp.file("v1") + "/img_overlay.png") == file_bytes(ref));
}

TEST_CASE("synthetic datasets are labeled exactly") {
  testsupport::TempDir tmp;
  pipeline::SynthConfig scfg;
  scfg.count = 8;
  scfg.image_size = 32;
  scfg.seed = 9;
  scfg.out_dir = tmp.file("data");
  data::Manifest made = pipeline::synthesize_dataset(scfg);
  REQUIRE(made.records.size() == 8);

  data::Manifest loaded =
      data::load_manifest((std::filesystem::path(scfg.out_dir) / "manifest.jsonl").string());
  REQUIRE(loaded.records.size() == 8);

  for (const auto& rec : loaded.records) {
    CHECK(std::filesystem::exists(loaded.resolve(rec.image)));
    REQUIRE(rec.mask.has_value());
    data::SegmentationMask mask = data::load_mask(loaded.resolve(*rec.mask));
    CHECK(mask.h == 32);
    CHECK(mask.w == 32);

    std::array<bool, data::kNumClasses> present{};
    for (uint8_t v : mask.labels) {
      CHECK(v <= data::kBackgroundLabel);
      if (v < data::kNumClasses) present[v] = true;
    }
    int labeled = 0;
    for (int c = 0; c < data::kNumClasses; ++c) {
      CHECK(rec.labels[static_cast<size_t>(c)] == (present[static_cast<size_t>(c)] ? 1 : 0));
      labeled += rec.labels[static_cast<size_t>(c)];
    }
    CHECK(labeled >= 1);
  }
}

TEST_CASE("prediction has coherent geometry") {
  testsupport::TempDir tmp;
  pipeline::SynthConfig scfg;
  scfg.count = 1;
  scfg.image_size = 32;
  scfg.seed = 41;
  scfg.out_dir = tmp.file("data");
  data::Manifest manifest = pipeline::synthesize_dataset(scfg);

  pipeline::RunConfig cfg = small_cfg(32, 6);
  cfg.post.crf_enabled = false;
  pipeline::Model model = pipeline::build_model(cfg, default_prompt_vec());
  data::RGBImage image = data::load_image(manifest.resolve(manifest.records[0].image), 32);

  pipeline::Prediction pred = pipeline::predict(model, image);
  CHECK(pred.mask.h == 32);
  CHECK(pred.mask.w == 32);
  REQUIRE(pred.probabilities.shape == core::Shape{data::kNumClasses + 1, 32, 32});
  REQUIRE(pred.norm_cams.shape == core::Shape{data::kNumClasses, 32, 32});
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      double sum = 0.0;
      for (int c = 0; c <= data::kNumClasses; ++c) sum += pred.probabilities(c, y, x);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  for (double v : pred.norm_cams.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
