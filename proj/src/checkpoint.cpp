#include "histoseg/pipeline/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

#include "histoseg/core/error.hpp"

namespace histoseg::pipeline {

namespace {

constexpr char kMagic[8] = {'H', 'S', 'C', 'K', 'P', 'T', '0', '1'};

// Tensor payloads are float32 regardless of host endianness; the bytes are
// assembled explicitly so archives are portable.
void append_f32(std::string& blob, const core::Tensor& t) {
  for (double d : t.data) {
    const float f = static_cast<float>(d);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    blob.push_back(static_cast<char>(bits & 0xff));
    blob.push_back(static_cast<char>((bits >> 8) & 0xff));
    blob.push_back(static_cast<char>((bits >> 16) & 0xff));
    blob.push_back(static_cast<char>((bits >> 24) & 0xff));
  }
}

core::Tensor read_f32(const std::string& blob, std::size_t offset, const core::Shape& shape) {
  const std::size_t count = static_cast<std::size_t>(core::shape_numel(shape));
  if (offset + count * 4 > blob.size())
    core::fail(core::Error::Kind::io, "checkpoint: tensor payload out of bounds");
  core::Tensor t = core::Tensor::zeros(shape);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t o = offset + i * 4;
    std::uint32_t bits = static_cast<std::uint8_t>(blob[o]) |
                         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(blob[o + 1])) << 8) |
                         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(blob[o + 2])) << 16) |
                         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(blob[o + 3])) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    t.data[i] = static_cast<double>(f);
  }
  return t;
}

}  // namespace

Checkpoint snapshot_model(const Model& model, std::int64_t step) {
  Checkpoint c;
  c.config_hash = config_hash(model.cfg);
  c.step = step;
  for (const auto& p : model.store.items()) c.tensors.emplace_back(p->name, p->value);
  c.bank_items = model.bank.snapshot();
  c.bank_cursor = model.bank.cursor();
  c.bank_capacity = model.bank.capacity();
  return c;
}

void apply_checkpoint(Model& model, const Checkpoint& ckpt) {
  if (ckpt.tensors.size() != model.store.items().size())
    core::fail(core::Error::Kind::argument, "checkpoint: parameter count does not match the model");
  for (const auto& [name, value] : ckpt.tensors) {
    core::Param* p = model.store.find(name);
    if (!p) core::fail(core::Error::Kind::argument, "checkpoint: unknown parameter '" + name + "'");
    if (p->value.shape != value.shape)
      core::fail(core::Error::Kind::shape, "checkpoint: shape mismatch for '" + name + "'");
    p->value = value;
  }
  if (ckpt.bank_capacity != model.bank.capacity())
    model.bank = refine::MemoryBank(ckpt.bank_capacity);
  model.bank.restore(ckpt.bank_items, ckpt.bank_cursor);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["version"] = ckpt.version;
  header["config_hash"] = ckpt.config_hash;
  header["step"] = ckpt.step;

  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, value] : ckpt.tensors) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = value.shape;
    e["offset"] = blob.size();
    tensors.push_back(e);
    append_f32(blob, value);
  }
  header["tensors"] = tensors;

  nlohmann::json bank;
  bank["capacity"] = ckpt.bank_capacity;
  bank["cursor"] = ckpt.bank_cursor;
  nlohmann::json items = nlohmann::json::array();
  for (const core::Tensor& t : ckpt.bank_items) {
    nlohmann::json e;
    e["shape"] = t.shape;
    e["offset"] = blob.size();
    items.push_back(e);
    append_f32(blob, t);
  }
  bank["items"] = items;
  header["bank"] = bank;

  const std::string htext = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) core::fail(core::Error::Kind::io, "checkpoint: cannot write " + path);
  out.write(kMagic, 8);
  const std::uint64_t hlen = htext.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((hlen >> (8 * i)) & 0xff);
  out.write(lenbuf, 8);
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) core::fail(core::Error::Kind::io, "checkpoint: write failed on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) core::fail(core::Error::Kind::io, "checkpoint: cannot open " + path);
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() < 16 || std::memcmp(raw.data(), kMagic, 8) != 0)
    core::fail(core::Error::Kind::io, "checkpoint: bad magic in " + path);
  std::uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i)
    hlen |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(raw[8 + i])) << (8 * i);
  if (16 + hlen > raw.size()) core::fail(core::Error::Kind::io, "checkpoint: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(raw.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    core::fail(core::Error::Kind::io, std::string("checkpoint: corrupt header: ") + e.what());
  }
  const std::string blob = raw.substr(16 + hlen);

  Checkpoint c;
  try {
    c.version = header.at("version").get<int>();
    c.config_hash = header.at("config_hash").get<std::string>();
    c.step = header.at("step").get<std::int64_t>();
    for (const auto& e : header.at("tensors")) {
      const core::Shape shape = e.at("shape").get<core::Shape>();
      c.tensors.emplace_back(e.at("name").get<std::string>(),
                             read_f32(blob, e.at("offset").get<std::size_t>(), shape));
    }
    const auto& bank = header.at("bank");
    c.bank_capacity = bank.at("capacity").get<int>();
    c.bank_cursor = bank.at("cursor").get<int>();
    for (const auto& e : bank.at("items")) {
      const core::Shape shape = e.at("shape").get<core::Shape>();
      c.bank_items.push_back(read_f32(blob, e.at("offset").get<std::size_t>(), shape));
    }
  } catch (const nlohmann::json::exception& e) {
    core::fail(core::Error::Kind::io, std::string("checkpoint: malformed header field: ") + e.what());
  }
  if (c.version != 1) core::fail(core::Error::Kind::io, "checkpoint: unsupported version");
  return c;
}

}  // namespace histoseg::pipeline
