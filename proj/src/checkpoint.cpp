#include "topicflow/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "topicflow/corpus.h"

namespace topicflow {

namespace {

constexpr char kMagic[4] = {'T', 'F', 'C', 'K'};

void put_u64_le(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t get_u64_le(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f64_le(std::string& out, double d) {
  put_u64_le(out, std::bit_cast<uint64_t>(d));
}

double get_f64_le(const unsigned char* p) { return std::bit_cast<double>(get_u64_le(p)); }

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor& Checkpoint::require(const std::string& name) const {
  const NamedTensor* t = find(name);
  if (!t) throw IoError("checkpoint is missing tensor '" + name + "'");
  return *t;
}

void Checkpoint::save(const std::string& path) const {
  nlohmann::json header;
  header["format_version"] = 1;
  header["config"] = config;
  header["tensors"] = nlohmann::json::array();
  for (const NamedTensor& t : tensors) {
    if (t.data.size() != shape_numel(t.shape)) {
      throw IoError("checkpoint tensor '" + t.name + "' has " +
                    std::to_string(t.data.size()) + " values but shape needs " +
                    std::to_string(shape_numel(t.shape)));
    }
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}});
  }
  const std::string header_str = header.dump();

  std::string blob;
  blob.reserve(12 + header_str.size() + tensors.size() * 64);
  blob.append(kMagic, 4);
  put_u64_le(blob, header_str.size());
  blob += header_str;
  for (const NamedTensor& t : tensors) {
    for (double d : t.data) put_f64_le(blob, d);
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("cannot rename " + tmp + " to " + path);
  }
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < 12 || std::memcmp(blob.data(), kMagic, 4) != 0) {
    throw IoError(path + ": not a checkpoint file (bad magic)");
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  const uint64_t header_len = get_u64_le(bytes + 4);
  if (12 + header_len > blob.size()) {
    throw IoError(path + ": truncated header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": invalid header JSON: " + e.what());
  }
  if (!header.contains("format_version") || header["format_version"].get<int>() != 1) {
    throw IoError(path + ": unsupported format_version");
  }

  Checkpoint ck;
  ck.config = header.value("config", nlohmann::json::object());
  size_t off = 12 + header_len;
  for (const auto& entry : header.value("tensors", nlohmann::json::array())) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<int>>();
    const size_t n = shape_numel(t.shape);
    if (off + 8 * n > blob.size()) {
      throw IoError(path + ": truncated payload for tensor '" + t.name + "'");
    }
    t.data.resize(n);
    for (size_t i = 0; i < n; ++i) t.data[i] = get_f64_le(bytes + off + 8 * i);
    off += 8 * n;
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

}  // namespace topicflow
