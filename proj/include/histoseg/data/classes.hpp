#pragma once

#include <array>
#include <string>
#include <string_view>

namespace histoseg::data {

// Tissue classes in canonical order. Label maps use these indices for
// foreground and kBackgroundLabel for everything else; every labels vector in
// the system follows this order.
inline constexpr int kNumClasses = 4;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {"TUM", "STR", "LYM",
                                                                          "NEC"};
inline constexpr int kBackgroundLabel = kNumClasses;

// Returns the canonical index, or -1 if the name is unknown.
inline int class_index(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (kClassNames[static_cast<size_t>(i)] == name) return i;
  return -1;
}

inline std::string class_name(int index) {
  if (index == kBackgroundLabel) return "BG";
  return std::string(kClassNames.at(static_cast<size_t>(index)));
}

}  // namespace histoseg::data
