#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "histoseg/core/error.hpp"
#include "histoseg/encoders/backend.hpp"
#include "histoseg/encoders/toy_backend.hpp"

namespace histoseg::encoders {

namespace {

// Published tower sizes backing the parameter-budget report when the real
// pair is requested. The trainable set is counted live from the ParamStore;
// these only provide the frozen denominator.
BackendInfo real_pair_info() {
  BackendInfo info;
  info.name = "conch+segformer";
  info.student_channels = 768;
  info.text_dim = 512;
  info.teacher_channels = {64, 128, 320, 512};
  info.frozen_student_params = 86'300'000 + 63'500'000;  // vision + text towers
  info.frozen_teacher_params = 13'700'000;
  return info;
}

bool real_weights_present() {
  const char* dir = std::getenv("HISTOSEG_WEIGHTS");
  if (!dir) return false;
  namespace fs = std::filesystem;
  return fs::exists(fs::path(dir) / "conch_vitb16.bin") &&
         fs::exists(fs::path(dir) / "segformer_mitb1.bin");
}

}  // namespace

std::vector<std::string> known_backends() { return {"toy", "conch+segformer"}; }

BackendInfo describe_backend(const std::string& name) {
  if (name == "toy") return ToyVisionLanguageBackend(0).info();
  if (name == "conch+segformer") return real_pair_info();
  core::fail(core::Error::Kind::backend,
             "unknown backend '" + name + "' (known: toy, conch+segformer)");
}

std::unique_ptr<EncoderBackend> create_backend(const std::string& name,
                                               std::uint64_t seed) {
  if (name == "toy")
    return std::make_unique<ToyVisionLanguageBackend>(seed);
  if (name == "conch+segformer") {
    if (real_weights_present())
      core::fail(core::Error::Kind::backend,
                 "pretrained weight archives found but this build has no "
                 "loader for them; use the toy backend");
    std::cerr << "[histoseg] warning: backend 'conch+segformer' needs "
                 "pretrained weight archives (set HISTOSEG_WEIGHTS); none "
                 "found, falling back to the deterministic toy backend\n";
    return std::make_unique<ToyVisionLanguageBackend>(seed, ToyDims{},
                                                      "conch+segformer");
  }
  core::fail(core::Error::Kind::backend,
             "unknown backend '" + name + "' (known: toy, conch+segformer)");
}

}  // namespace histoseg::encoders
