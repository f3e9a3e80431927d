#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace topicflow {

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};

// Versioned binary parameter container: magic "TFCK", a little-endian u64
// header length, a JSON header {"format_version":1, "config":{...},
// "tensors":[{"name","shape"}]}, then the tensor payloads as 64-bit
// little-endian floats in header order. Writes are atomic (temp + rename).
struct Checkpoint {
  nlohmann::json config;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  const NamedTensor& require(const std::string& name) const;  // throws IoError

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace topicflow
