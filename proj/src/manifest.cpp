#include "histoseg/data/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "histoseg/core/error.hpp"
#include "json.hpp"

namespace histoseg::data {

namespace fs = std::filesystem;
using core::Error;
using core::fail;
using nlohmann::json;

namespace {

[[noreturn]] void schema_fail(const std::string& path, size_t line, const std::string& msg) {
  fail(Error::Kind::schema, path + ":" + std::to_string(line) + ": " + msg);
}

std::array<int, kNumClasses> parse_labels(const json& j, const std::string& path, size_t line) {
  std::array<int, kNumClasses> out{};
  if (!j.is_array()) schema_fail(path, line, "labels must be an array");
  // Either bit-vector form [0,1,0,1] in canonical class order, or a list of
  // class names in any order.
  if (!j.empty() && j.front().is_string()) {
    for (const auto& e : j) {
      if (!e.is_string()) schema_fail(path, line, "labels mixes names and numbers");
      const int idx = class_index(e.get<std::string>());
      if (idx < 0) schema_fail(path, line, "unknown class name '" + e.get<std::string>() + "'");
      if (out[static_cast<size_t>(idx)]) schema_fail(path, line, "duplicate class name");
      out[static_cast<size_t>(idx)] = 1;
    }
    return out;
  }
  if (j.size() != kNumClasses)
    schema_fail(path, line,
                "labels must have " + std::to_string(kNumClasses) + " entries, got " +
                    std::to_string(j.size()));
  for (size_t i = 0; i < kNumClasses; ++i) {
    if (!j[i].is_number_integer()) schema_fail(path, line, "labels entries must be 0 or 1");
    const int v = j[i].get<int>();
    if (v != 0 && v != 1) schema_fail(path, line, "labels entries must be 0 or 1");
    out[i] = v;
  }
  return out;
}

}  // namespace

std::string Manifest::resolve(const std::string& path) const {
  fs::path p(path);
  if (p.is_absolute() || root.empty()) return path;
  return (fs::path(root) / p).string();
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Error::Kind::io, "cannot open manifest: " + path);
  Manifest m;
  m.root = fs::path(path).parent_path().string();

  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      schema_fail(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) schema_fail(path, lineno, "each line must be a JSON object");
    Record rec;
    bool saw_image = false, saw_labels = false;
    for (const auto& [key, val] : j.items()) {
      if (key == "image") {
        if (!val.is_string()) schema_fail(path, lineno, "image must be a string");
        rec.image = val.get<std::string>();
        saw_image = true;
      } else if (key == "labels") {
        rec.labels = parse_labels(val, path, lineno);
        saw_labels = true;
      } else if (key == "mask") {
        if (!val.is_string()) schema_fail(path, lineno, "mask must be a string");
        rec.mask = val.get<std::string>();
      } else if (key == "split") {
        if (!val.is_string()) schema_fail(path, lineno, "split must be a string");
        rec.split = val.get<std::string>();
      } else {
        schema_fail(path, lineno, "unknown key '" + key + "'");
      }
    }
    if (!saw_image) schema_fail(path, lineno, "missing required key 'image'");
    if (!saw_labels) schema_fail(path, lineno, "missing required key 'labels'");
    if (!fs::exists(m.resolve(rec.image)))
      fail(Error::Kind::io, path + ":" + std::to_string(lineno) +
                                ": image file not found: " + m.resolve(rec.image));
    if (rec.mask && !fs::exists(m.resolve(*rec.mask)))
      fail(Error::Kind::io, path + ":" + std::to_string(lineno) +
                                ": mask file not found: " + m.resolve(*rec.mask));
    m.records.push_back(std::move(rec));
  }
  if (m.records.empty())
    std::cerr << "[warn] manifest is empty: " << path << "\n";
  return m;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) fail(Error::Kind::io, "cannot write manifest: " + path);
  for (const auto& rec : manifest.records) {
    json j;
    j["image"] = rec.image;
    j["labels"] = rec.labels;
    if (rec.mask) j["mask"] = *rec.mask;
    if (rec.split) j["split"] = *rec.split;
    out << j.dump() << "\n";
  }
}

Manifest import_labelcoded_dir(const std::string& images_dir, const std::string& masks_dir) {
  if (!fs::is_directory(images_dir))
    fail(Error::Kind::io, "not a directory: " + images_dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(images_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png")
      names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());

  Manifest m;
  m.root = "";
  for (const auto& name : names) {
    // Expect a "[dddd]" block (digits optionally separated by spaces/commas).
    const auto open = name.rfind('[');
    const auto close = name.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open) continue;
    std::vector<int> bits;
    for (size_t i = open + 1; i < close; ++i) {
      const char c = name[i];
      if (c == '0' || c == '1')
        bits.push_back(c - '0');
      else if (c != ' ' && c != ',')
        bits.clear(), i = close;  // malformed block: skip file
    }
    if (bits.size() != kNumClasses) continue;
    Record rec;
    rec.image = (fs::path(images_dir) / name).string();
    for (size_t i = 0; i < kNumClasses; ++i) rec.labels[i] = bits[i];
    if (!masks_dir.empty()) {
      const fs::path mp = fs::path(masks_dir) / name;
      if (fs::exists(mp)) rec.mask = mp.string();
    }
    m.records.push_back(std::move(rec));
  }
  if (m.records.empty())
    std::cerr << "[warn] no label-coded files found in " << images_dir << "\n";
  return m;
}

}  // namespace histoseg::data
