// SPDX-License-Identifier: Apache-2.0
#include "vkg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vkg/errors.hpp"

namespace vkg {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', 'K', 'G', '1'};

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(path.string() + ": truncated header");
  return v;
}

}  // namespace

const StoredTensor* CheckpointData::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta, const ParamList& params) {
  nlohmann::json header = meta;
  auto entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    entries.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}, {"count", p.tensor.numel()}});
    offset += p.tensor.numel() * sizeof(float);
  }
  header["tensors"] = std::move(entries);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<float> buf;
  for (const auto& p : params) {
    buf.assign(p.tensor.data().begin(), p.tensor.data().end());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path.string() + ": not a VKG1 checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = read_pod<std::uint64_t>(in, path);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw FormatError(path.string() + ": truncated header");
  }
  CheckpointData data;
  try {
    data.meta = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header JSON: " + e.what());
  }
  const std::streampos payload = in.tellg();
  for (const auto& e : data.meta.at("tensors")) {
    StoredTensor t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<Shape>();
    const auto count = e.at("count").get<std::size_t>();
    if (count != shape_numel(t.shape)) throw FormatError(path.string() + ": tensor " + t.name + " count mismatch");
    t.values.resize(count);
    in.seekg(payload + static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
    if (!in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(count * sizeof(float)))) {
      throw FormatError(path.string() + ": truncated payload for " + t.name);
    }
    data.tensors.push_back(std::move(t));
  }
  data.meta.erase("tensors");
  return data;
}

void restore_params(const CheckpointData& data, const ParamList& params) {
  for (const auto& p : params) {
    const StoredTensor* t = data.find(p.name);
    if (!t) throw FormatError("checkpoint has no tensor '" + p.name + "'");
    if (t->shape != p.tensor.shape()) {
      throw FormatError("checkpoint tensor '" + p.name + "' has shape " + shape_str(t->shape) + ", expected " +
                        shape_str(p.tensor.shape()));
    }
    Tensor dst = p.tensor;
    auto out = dst.mutable_data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(t->values[i]);
  }
}

}  // namespace vkg
