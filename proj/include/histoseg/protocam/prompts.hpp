#pragma once

#include <array>
#include <string>

#include "histoseg/data/classes.hpp"

namespace histoseg::protocam {

// Pathology descriptions used to seed the class prototypes, class-ordered
// (TUM, STR, LYM, NEC).
const std::array<std::string, data::kNumClasses>& default_prompts();

// JSON file mapping class name -> description. Classes not present keep
// their default text; unknown class names are a schema error.
std::array<std::string, data::kNumClasses> load_prompt_file(
    const std::string& path);

}  // namespace histoseg::protocam
