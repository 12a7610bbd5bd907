// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint file layout (all integers little-endian):
//   "VKG1"              4 magic bytes
//   u32 version         currently 1
//   u64 header_bytes
//   header              UTF-8 JSON: caller metadata plus
//                       "tensors": [{"name", "shape", "offset", "count"}, ...]
//   payload             float32 values; offsets are bytes from payload start
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vkg/transformer.hpp"

namespace vkg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct CheckpointData {
  nlohmann::json meta;
  std::vector<StoredTensor> tensors;

  const StoredTensor* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta, const ParamList& params);
CheckpointData load_checkpoint(const std::filesystem::path& path);

// Copies stored values into same-named parameters. Throws FormatError for a
// missing name or a shape mismatch.
void restore_params(const CheckpointData& data, const ParamList& params);

}  // namespace vkg
