#include "histoseg/pipeline/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "histoseg/core/error.hpp"
#include "histoseg/core/rng.hpp"

namespace histoseg::pipeline {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& where, const std::string& key) {
  core::fail(core::Error::Kind::schema, "config: unknown key '" + where + "." + key + "'");
}

double num(const json& v, const std::string& key) {
  if (!v.is_number()) core::fail(core::Error::Kind::schema, "config: '" + key + "' must be a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& key) {
  if (!v.is_number_integer())
    core::fail(core::Error::Kind::schema, "config: '" + key + "' must be an integer");
  return v.get<int>();
}

bool boolean(const json& v, const std::string& key) {
  if (!v.is_boolean()) core::fail(core::Error::Kind::schema, "config: '" + key + "' must be a bool");
  return v.get<bool>();
}

void parse_train(const json& j, RunConfig& cfg) {
  for (const auto& [k, v] : j.items()) {
    if (k == "epochs") cfg.epochs = integer(v, "train.epochs");
    else if (k == "learning_rate") cfg.learning_rate = num(v, "train.learning_rate");
    else if (k == "weight_decay") cfg.weight_decay = num(v, "train.weight_decay");
    else if (k == "batch_size") cfg.batch_size = integer(v, "train.batch_size");
    else if (k == "seed") {
      if (!v.is_number_unsigned() && !v.is_number_integer())
        core::fail(core::Error::Kind::schema, "config: 'train.seed' must be an integer");
      cfg.seed = v.get<std::uint64_t>();
    } else if (k == "backend") {
      if (!v.is_string()) core::fail(core::Error::Kind::schema, "config: 'train.backend' must be a string");
      cfg.backend = v.get<std::string>();
    } else if (k == "image_size") cfg.image_size = integer(v, "train.image_size");
    else bad_key("train", k);
  }
}

void parse_distill(const json& j, RunConfig& cfg, bool& weight_seen, double& weight_value) {
  for (const auto& [k, v] : j.items()) {
    if (k == "layers") {
      if (!v.is_array()) core::fail(core::Error::Kind::schema, "config: 'distill.layers' must be an array");
      cfg.distill_cfg.layers.clear();
      for (const auto& e : v) cfg.distill_cfg.layers.push_back(integer(e, "distill.layers[]"));
    } else if (k == "weight") {
      weight_seen = true;
      weight_value = num(v, "distill.weight");
    } else bad_key("distill", k);
  }
}

}  // namespace

void validate(const RunConfig& cfg) {
  if (cfg.epochs < 1) core::fail(core::Error::Kind::argument, "config: epochs must be >= 1");
  if (cfg.batch_size < 1) core::fail(core::Error::Kind::argument, "config: batch_size must be >= 1");
  if (cfg.learning_rate <= 0) core::fail(core::Error::Kind::argument, "config: learning_rate must be > 0");
  if (cfg.weight_decay < 0) core::fail(core::Error::Kind::argument, "config: weight_decay must be >= 0");
  if (cfg.image_size < 8) core::fail(core::Error::Kind::argument, "config: image_size must be >= 8");
  if (cfg.proto_n_ratio < 1) core::fail(core::Error::Kind::argument, "config: proto.n_ratio must be >= 1");
  if (cfg.logit_scale_init <= 0)
    core::fail(core::Error::Kind::argument, "config: proto.logit_scale_init must be > 0");
  if (cfg.refine_alpha <= 0.0 || cfg.refine_alpha >= 1.0)
    core::fail(core::Error::Kind::argument, "config: refine.alpha must lie in (0,1)");
  if (cfg.refine_temperature <= 0)
    core::fail(core::Error::Kind::argument, "config: refine.temperature must be > 0");
  if (cfg.bank_capacity < 1) core::fail(core::Error::Kind::argument, "config: refine.bank_capacity must be >= 1");
  if (cfg.loss.cls < 0 || cfg.loss.structural < 0 || cfg.loss.sim < 0)
    core::fail(core::Error::Kind::argument, "config: loss weights must be >= 0");
  if (cfg.post.bg_exponent <= 0) core::fail(core::Error::Kind::argument, "config: post.bg_exponent must be > 0");
  distill::validate(cfg.distill_cfg);
  postprocess::validate(cfg.crf);
}

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    core::fail(core::Error::Kind::schema, std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) core::fail(core::Error::Kind::schema, "config: document must be a JSON object");

  RunConfig cfg;
  bool distill_weight_seen = false, loss_struct_seen = false;
  double distill_weight = 0.0, loss_struct = 0.0;

  for (const auto& [section, body] : doc.items()) {
    if (section == "train") parse_train(body, cfg);
    else if (section == "distill") parse_distill(body, cfg, distill_weight_seen, distill_weight);
    else if (section == "proto") {
      for (const auto& [k, v] : body.items()) {
        if (k == "n_ratio") cfg.proto_n_ratio = integer(v, "proto.n_ratio");
        else if (k == "logit_scale_init") cfg.logit_scale_init = num(v, "proto.logit_scale_init");
        else bad_key("proto", k);
      }
    } else if (section == "refine") {
      for (const auto& [k, v] : body.items()) {
        if (k == "alpha") cfg.refine_alpha = num(v, "refine.alpha");
        else if (k == "temperature") cfg.refine_temperature = num(v, "refine.temperature");
        else if (k == "bank_capacity") cfg.bank_capacity = integer(v, "refine.bank_capacity");
        else bad_key("refine", k);
      }
    } else if (section == "loss") {
      for (const auto& [k, v] : body.items()) {
        if (k == "cls") cfg.loss.cls = num(v, "loss.cls");
        else if (k == "struct") {
          loss_struct_seen = true;
          loss_struct = num(v, "loss.struct");
        } else if (k == "sim") cfg.loss.sim = num(v, "loss.sim");
        else bad_key("loss", k);
      }
    } else if (section == "crf") {
      for (const auto& [k, v] : body.items()) {
        if (k == "w1") cfg.crf.w1 = num(v, "crf.w1");
        else if (k == "w2") cfg.crf.w2 = num(v, "crf.w2");
        else if (k == "sa") cfg.crf.sa = num(v, "crf.sa");
        else if (k == "sb") cfg.crf.sb = num(v, "crf.sb");
        else if (k == "sg") cfg.crf.sg = num(v, "crf.sg");
        else if (k == "iters") cfg.crf.iterations = integer(v, "crf.iters");
        else bad_key("crf", k);
      }
    } else if (section == "tta") {
      for (const auto& [k, v] : body.items()) {
        if (k == "enabled") cfg.tta.enabled = boolean(v, "tta.enabled");
        else bad_key("tta", k);
      }
    } else if (section == "post") {
      for (const auto& [k, v] : body.items()) {
        if (k == "bg_exponent") cfg.post.bg_exponent = num(v, "post.bg_exponent");
        else if (k == "crf") cfg.post.crf_enabled = boolean(v, "post.crf");
        else bad_key("post", k);
      }
    } else {
      core::fail(core::Error::Kind::schema, "config: unknown section '" + section + "'");
    }
  }

  // distill.weight and loss.struct name the same multiplier.
  if (distill_weight_seen && loss_struct_seen && distill_weight != loss_struct)
    core::fail(core::Error::Kind::schema,
               "config: distill.weight and loss.struct disagree; set one (or equal values)");
  if (distill_weight_seen) cfg.loss.structural = distill_weight;
  if (loss_struct_seen) cfg.loss.structural = loss_struct;
  cfg.distill_cfg.weight = cfg.loss.structural;

  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) core::fail(core::Error::Kind::io, "config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["train"] = {{"epochs", cfg.epochs},
                {"learning_rate", cfg.learning_rate},
                {"weight_decay", cfg.weight_decay},
                {"batch_size", cfg.batch_size},
                {"seed", cfg.seed},
                {"backend", cfg.backend},
                {"image_size", cfg.image_size}};
  j["distill"] = {{"layers", cfg.distill_cfg.layers}, {"weight", cfg.distill_cfg.weight}};
  j["proto"] = {{"n_ratio", cfg.proto_n_ratio}, {"logit_scale_init", cfg.logit_scale_init}};
  j["refine"] = {{"alpha", cfg.refine_alpha},
                 {"temperature", cfg.refine_temperature},
                 {"bank_capacity", cfg.bank_capacity}};
  j["loss"] = {{"cls", cfg.loss.cls}, {"struct", cfg.loss.structural}, {"sim", cfg.loss.sim}};
  j["crf"] = {{"w1", cfg.crf.w1}, {"w2", cfg.crf.w2}, {"sa", cfg.crf.sa},
              {"sb", cfg.crf.sb}, {"sg", cfg.crf.sg}, {"iters", cfg.crf.iterations}};
  j["tta"] = {{"enabled", cfg.tta.enabled}};
  j["post"] = {{"bg_exponent", cfg.post.bg_exponent}, {"crf", cfg.post.crf_enabled}};
  return j.dump(2);
}

std::string config_hash(const RunConfig& cfg) {
  const std::uint64_t h = core::fnv1a64(config_to_json(cfg));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace histoseg::pipeline
