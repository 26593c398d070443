#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "histoseg/data/classes.hpp"

namespace histoseg::data {

struct Record {
  std::string image;                       // path, relative to Manifest::root or absolute
  std::array<int, kNumClasses> labels{};   // 0/1 per class, canonical order
  std::optional<std::string> mask;
  std::optional<std::string> split;
};

struct Manifest {
  std::string root;  // directory all relative paths resolve against
  std::vector<Record> records;

  std::string resolve(const std::string& path) const;
};

// Parses a JSON-lines manifest: one object per line with keys
//   image (string), labels ([0/1 x 4] or class names), mask?, split?
// Unknown keys, bad arity, or unknown class names raise schema errors naming
// the line. Referenced files must exist. An empty file yields an empty
// manifest with a warning on stderr.
Manifest load_manifest(const std::string& path);

void write_manifest(const std::string& path, const Manifest& manifest);

// Converts a directory of label-coded files ("name-[1 0 0 1].png" or
// "name-[1001].png") into a manifest. If masks_dir is non-empty, a file with
// the same name there becomes the record's mask.
Manifest import_labelcoded_dir(const std::string& images_dir, const std::string& masks_dir);

}  // namespace histoseg::data
