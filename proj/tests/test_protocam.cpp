#include <cmath>
#include <vector>

#include "doctest.h"
#include "histoseg/core/autograd.hpp"
#include "histoseg/core/error.hpp"
#include "histoseg/distill/distill.hpp"
#include "histoseg/encoders/adapters.hpp"
#include "histoseg/encoders/toy_backend.hpp"
#include "histoseg/protocam/prompts.hpp"
#include "histoseg/protocam/prototypes.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace histoseg;

namespace {

std::vector<std::string> four_prompts() {
  const auto& d = protocam::default_prompts();
  return {d.begin(), d.end()};
}

}  // namespace

TEST_CASE("init_prototypes: counts, determinism, shared projection") {
  encoders::ToyVisionLanguageBackend be(7);
  core::Rng r1(5), r2(5);
  core::ParamStore s1, s2;
  auto b1 = protocam::init_prototypes(s1, be, four_prompts(), {}, r1);
  auto b2 = protocam::init_prototypes(s2, be, four_prompts(), {}, r2);
  CHECK(b1.class_count() == 4);
  REQUIRE(s1.items().size() == s2.items().size());
  for (size_t i = 0; i < s1.items().size(); ++i) {
    CHECK(s1.items()[i]->name == s2.items()[i]->name);
    CHECK(s1.items()[i]->value.data == s2.items()[i]->value.data);
  }

  core::ParamStore s3;
  core::Rng r3(5);
  std::vector<std::string> dup = four_prompts();
  dup[2] = dup[0];  // duplicate prompt -> identical prototype rows
  auto b3 = protocam::init_prototypes(s3, be, dup, {}, r3);
  core::Graph g;
  const auto fwd = b3.forward(g);
  for (int d = 0; d < fwd.p_tilde->val.dim(1); ++d)
    CHECK(fwd.p_tilde->val(0, d) == fwd.p_tilde->val(2, d));

  core::ParamStore s4;
  core::Rng r4(5);
  CHECK_THROWS_AS(
      (void)protocam::init_prototypes(s4, be, {"one", "two"}, {}, r4),
      core::Error);
}

TEST_CASE("prototypes start exactly at the normalized text embeddings") {
  encoders::ToyVisionLanguageBackend be(11);
  core::Rng rng(3);
  core::ParamStore store;
  auto bank = protocam::init_prototypes(store, be, four_prompts(), {}, rng);
  core::Graph g;
  const auto fwd = bank.forward(g);
  const auto& text = bank.text_embeddings();  // rows already unit-norm
  for (int c = 0; c < 4; ++c)
    for (int d = 0; d < text.dim(1); ++d)
      CHECK(fwd.p_tilde->val(c, d) ==
            doctest::Approx(text(c, d)).epsilon(1e-9));
  // P_4 is the zero-padded P-tilde at init.
  REQUIRE(fwd.p4->val.dim(1) == bank.dims().student_channels);
  for (int c = 0; c < 4; ++c)
    for (int d = 0; d < fwd.p4->val.dim(1); ++d) {
      const double expect = d < text.dim(1) ? fwd.p_tilde->val(c, d) : 0.0;
      CHECK(fwd.p4->val(c, d) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("prototype rows stay unit-norm after parameter perturbation") {
  encoders::ToyVisionLanguageBackend be(2);
  core::Rng rng(9);
  core::ParamStore store;
  auto bank = protocam::init_prototypes(store, be, four_prompts(), {}, rng);
  for (const auto& p : store.items())
    for (double& v : p->value.data) v += rng.normal() * 0.3;
  core::Graph g;
  const auto fwd = bank.forward(g);
  for (int c = 0; c < 4; ++c) {
    double n = 0;
    for (int d = 0; d < fwd.p_tilde->val.dim(1); ++d)
      n += fwd.p_tilde->val(c, d) * fwd.p_tilde->val(c, d);
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("generate_cams: hand case, saturation values, shape errors") {
  core::ParamStore store;
  protocam::CamHead head(store, 1.0 / 0.07);
  core::Graph g;
  protocam::PrototypeForward protos;
  core::Tensor p4 = core::Tensor::zeros({2, 4});
  p4(0, 0) = 1.0;  // class 0 prototype = e0
  p4(1, 1) = 1.0;  // class 1 prototype = e1
  protos.p4 = g.constant(p4);
  core::Tensor feat = core::Tensor::zeros({4, 1, 2});
  feat(0, 0, 0) = 1.0;                    // token (0,0) = e0
  feat(0, 0, 1) = 0.6;                    // token (0,1) = [0.6, 0.8, 0, 0]
  feat(1, 0, 1) = 0.8;
  const auto cams = protocam::generate_cams(g, protos, head, g.constant(feat));
  REQUIRE(cams.grid_h == 1);
  REQUIRE(cams.grid_w == 2);
  const double tau = 1.0 / 0.07;
  CHECK(cams.scores->val(0, 0) == doctest::Approx(tau).epsilon(1e-9));
  CHECK(cams.scores->val(0, 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(cams.scores->val(1, 0) == doctest::Approx(0.6 * tau).epsilon(1e-9));
  CHECK(cams.scores->val(1, 1) == doctest::Approx(0.8 * tau).epsilon(1e-9));

  const auto chw = protocam::cams_to_chw(cams);
  CHECK(chw.dim(0) == 2);
  CHECK(chw(0, 0, 1) == cams.scores->val(1, 0));

  core::Tensor bad = core::Tensor::zeros({3, 1, 2});
  CHECK_THROWS_AS(
      (void)protocam::generate_cams(g, protos, head, g.constant(bad)),
      core::Error);
}

TEST_CASE("classification_loss: GAP then BCE, frozen values and oracle") {
  core::ParamStore store;
  protocam::CamHead head(store, 1.0 / 0.07);
  core::Graph g;
  // Build raw scores directly: 3 tokens x 4 classes with known column means
  // z = (1, -1, 0, 2).
  core::Tensor sc = core::Tensor::zeros({3, 4});
  for (int i = 0; i < 3; ++i) {
    sc(i, 0) = 1;
    sc(i, 1) = -1;
    sc(i, 2) = 0;
    sc(i, 3) = 2;
  }
  protocam::CamSet cams{g.constant(sc), 1, 3};
  const auto loss = protocam::classification_loss(g, cams, {1, 0, 0, 1});
  // Scalar BCE worked out independently: mean of
  // (softplus(-1), softplus(-1), ln 2, softplus(-2)).
  CHECK(loss->val.data[0] == doctest::Approx(0.3616496417).epsilon(1e-9));
  const double oracle =
      testsupport::bce_mean_oracle({1, -1, 0, 2}, {1, 0, 0, 1});
  CHECK(loss->val.data[0] == doctest::Approx(oracle).epsilon(1e-9));

  // All-zero scores: ln 2 per class regardless of labels.
  core::Tensor zs = core::Tensor::zeros({5, 4});
  protocam::CamSet zero_cams{g.constant(zs), 1, 5};
  const auto l2 = protocam::classification_loss(g, zero_cams, {1, 0, 1, 0});
  CHECK(l2->val.data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Saturation: large positive logit on the only positive class.
  core::Tensor sat = core::Tensor::zeros({1, 4});
  sat(0, 0) = 40.0;
  sat(0, 1) = -40.0;
  sat(0, 2) = -40.0;
  sat(0, 3) = -40.0;
  protocam::CamSet sat_cams{g.constant(sat), 1, 1};
  CHECK(protocam::classification_loss(g, sat_cams, {1, 0, 0, 0})->val.data[0] <
        1e-12);

  CHECK_THROWS_AS((void)protocam::classification_loss(g, cams, {1, 0}),
                  core::Error);
  CHECK_THROWS_AS((void)protocam::classification_loss(g, cams, {1, 0, 2, 0}),
                  core::Error);
}

TEST_CASE("normalize_cams: masking, affine map, degenerate cases") {
  core::Tensor cams = core::Tensor::zeros({4, 2, 2});
  // class 0: min 2 max 6 -> (x-2)/4
  cams(0, 0, 0) = 2;
  cams(0, 0, 1) = 6;
  cams(0, 1, 0) = 4;
  cams(0, 1, 1) = 3;
  // class 2: constant positive
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) cams(2, y, x) = 5.0;
  // class 3: arbitrary values, but label 0
  cams(3, 0, 0) = 9;
  const auto norm = protocam::normalize_cams(cams, {1, 1, 1, 0});
  CHECK(norm(0, 0, 0) == 0.0);
  CHECK(norm(0, 0, 1) == 1.0);
  CHECK(norm(0, 1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(norm(0, 1, 1) == doctest::Approx(0.25).epsilon(1e-12));
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      CHECK(norm(1, y, x) == 0.0);  // all-zero input map is constant -> zeros
      CHECK(norm(2, y, x) == 0.0);  // constant map -> zeros
      CHECK(norm(3, y, x) == 0.0);  // masked by label
    }
}

TEST_CASE("scaling the logit temperature leaves normalized maps unchanged") {
  encoders::ToyVisionLanguageBackend be(7, {16, 8, {4, 6, 8, 10}});
  core::Rng rng(13);
  core::ParamStore store;
  auto bank = protocam::init_prototypes(
      store, be, four_prompts(), {.student_channels = 16}, rng);
  protocam::CamHead head(store, 1.0 / 0.07);
  encoders::AdapterStack ad(store, {.channels = 16, .hidden = 8, .levels = 4},
                            rng);
  core::Rng imgr(1);
  data::RGBImage img = data::RGBImage::filled(32, 32, 0, 0, 0);
  for (double& v : img.px) v = imgr.uniform();
  const auto student = be.student_pyramid(img);
  const auto teacher = be.teacher_pyramid(img);

  auto run = [&]() {
    core::Graph g;
    auto refined = encoders::adapt(g, student, encoders::pyramid_grids(teacher), ad);
    auto cams = protocam::generate_cams(g, bank.forward(g), head, refined.levels[3]);
    return protocam::cams_to_chw(cams);
  };
  const auto raw1 = run();
  core::Param* tau = store.find("proto.logit_scale");
  REQUIRE(tau != nullptr);
  const double s = 3.5;
  tau->value.data[0] *= s;
  const auto raw2 = run();
  for (size_t i = 0; i < raw1.data.size(); ++i)
    CHECK(raw2.data[i] == doctest::Approx(raw1.data[i] * s).epsilon(1e-9));
  const auto n1 = protocam::normalize_cams(raw1, {1, 1, 1, 1});
  const auto n2 = protocam::normalize_cams(raw2, {1, 1, 1, 1});
  for (size_t i = 0; i < n1.data.size(); ++i)
    CHECK(n2.data[i] == doctest::Approx(n1.data[i]).epsilon(1e-9));
}

TEST_CASE("classification gradients reach every trainable group and only them") {
  encoders::ToyVisionLanguageBackend be(5, {16, 8, {4, 6, 8, 10}});
  core::Rng rng(23);
  core::ParamStore store;
  encoders::AdapterStack ad(store, {.channels = 16, .hidden = 8, .levels = 4},
                            rng);
  auto bank = protocam::init_prototypes(
      store, be, four_prompts(), {.student_channels = 16}, rng);
  protocam::CamHead head(store, 1.0 / 0.07);
  // Kick parameters off the zero-init stationary point so gradient paths
  // through the residual branches are live.
  for (const auto& p : store.items())
    if (p->name != "proto.logit_scale")
      for (double& v : p->value.data) v += rng.normal() * 0.05;

  core::Rng imgr(2);
  data::RGBImage img = data::RGBImage::filled(32, 32, 0, 0, 0);
  for (double& v : img.px) v = imgr.uniform();
  const auto student = be.student_pyramid(img);
  const auto teacher = be.teacher_pyramid(img);
  store.zero_grads();
  {
    core::Graph g;
    auto refined = encoders::adapt(g, student, encoders::pyramid_grids(teacher), ad);
    auto cams = protocam::generate_cams(g, bank.forward(g), head, refined.levels[3]);
    g.backward(protocam::classification_loss(g, cams, {1, 0, 1, 0}));
  }
  // Every parameter is either an adapter or a prototype-head weight; nothing
  // frozen ever enters the store.
  bool adapter4 = false, proj = false, adapt_mlp = false, tau = false;
  for (const auto& p : store.items()) {
    const bool named_ok = p->name.rfind("adapter", 0) == 0 ||
                          p->name.rfind("proto.", 0) == 0;
    CHECK(named_ok);
    double mag = 0;
    for (double v : p->grad.data) mag += std::abs(v);
    if (p->name.rfind("adapter4.", 0) == 0 && mag > 0) adapter4 = true;
    if (p->name.rfind("proto.proj", 0) == 0 && mag > 0) proj = true;
    if (p->name.rfind("proto.adapt", 0) == 0 && mag > 0) adapt_mlp = true;
    if (p->name == "proto.logit_scale" && mag > 0) tau = true;
    // The classification loss only sees level 4; earlier adapters get none.
    if (p->name.rfind("adapter1.", 0) == 0) CHECK(mag == 0.0);
  }
  CHECK(adapter4);
  CHECK(proj);
  CHECK(adapt_mlp);
  CHECK(tau);
  CHECK(store.find("proto.bg")->grad.data[0] == 0.0);  // bg: similarity loss only
}

TEST_CASE("trainable parameter budget at reference widths") {
  // Desk-scale widths.
  {
    core::ParamStore store;
    core::Rng rng(1);
    encoders::AdapterStack ad(store, {.channels = 64, .hidden = 32, .levels = 4},
                              rng);
    encoders::ToyVisionLanguageBackend be(1);
    auto bank = protocam::init_prototypes(store, be, four_prompts(), {}, rng);
    protocam::CamHead head(store, 1.0 / 0.07);
    const auto rep =
        encoders::report_parameters(store, encoders::describe_backend("toy"));
    CHECK(rep.trainable == 33217);
  }
  // Full-scale widths as the real backend pair would use them.
  {
    core::ParamStore store;
    core::Rng rng(1);
    const auto info = encoders::describe_backend("conch+segformer");
    encoders::AdapterStack ad(
        store, {.channels = info.student_channels, .hidden = 512, .levels = 4},
        rng);
    core::Tensor text = core::randn({4, info.text_dim}, rng, 1.0);
    protocam::PrototypeBank bank(
        store, text,
        {.d_text = info.text_dim, .d_proto = info.text_dim, .n_ratio = 4,
         .student_channels = info.student_channels},
        rng);
    protocam::CamHead head(store, 1.0 / 0.07);
    const auto rep = encoders::report_parameters(store, info);
    CHECK(rep.trainable == 6592257);
    CHECK(rep.trainable >= 5'800'000);
    CHECK(rep.trainable <= 6'800'000);
    CHECK(rep.trainable_fraction >= 0.03);
    CHECK(rep.trainable_fraction <= 0.04);
  }
}
