#include "histoseg/protocam/prompts.hpp"

#include <fstream>

#include "json.hpp"

#include "histoseg/core/error.hpp"

namespace histoseg::protocam {

const std::array<std::string, data::kNumClasses>& default_prompts() {
  static const std::array<std::string, data::kNumClasses> prompts = {
      "Tumor regions consist of malignant epithelial cells characterized by "
      "pleomorphic, hyperchromatic nuclei, loss of glandular structure, and "
      "frequent mitotic figures, representing the core cancerous lesions in "
      "breast tissue.",
      "Stroma comprises the surrounding connective tissue, including "
      "fibroblasts and collagen fibers, often appearing as pink fibrous "
      "structures and sometimes showing desmoplastic reactions to tumor "
      "invasion.",
      "Lymphocyte regions contain dense clusters of small immune cells with "
      "dark, round nuclei and minimal cytoplasm, reflecting the host immune "
      "response within the tumor microenvironment.",
      "Necrosis represents areas of dead or dying tissue with pale, "
      "structureless eosinophilic regions, nuclear debris, and \"ghost\" cell "
      "remnants, typically associated with aggressive tumor growth and poor "
      "vascularization.",
  };
  return prompts;
}

std::array<std::string, data::kNumClasses> load_prompt_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in)
    core::fail(core::Error::Kind::io, "cannot open prompt file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    core::fail(core::Error::Kind::schema,
               path + ": invalid JSON: " + std::string(e.what()));
  }
  if (!j.is_object())
    core::fail(core::Error::Kind::schema,
               path + ": prompt file must be an object of class -> text");
  auto prompts = default_prompts();
  for (const auto& [key, val] : j.items()) {
    const int idx = data::class_index(key);
    if (idx < 0)
      core::fail(core::Error::Kind::schema,
                 path + ": unknown class '" + key + "'");
    if (!val.is_string() || val.get<std::string>().empty())
      core::fail(core::Error::Kind::schema,
                 path + ": description for '" + key +
                     "' must be a non-empty string");
    prompts[static_cast<size_t>(idx)] = val.get<std::string>();
  }
  return prompts;
}

}  // namespace histoseg::protocam
