// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsbias/network.hpp"
#include "dsbias/optim.hpp"
#include "dsbias/train.hpp"

namespace dsbias {

/// Everything needed to rebuild and resume a trained model.
struct ModelBundle {
  ModelConfig model;
  PreprocessConfig prep;
  std::vector<std::string> labels;
  Network<float> net;
  AdamState<float> opt;
};

// Layout (little-endian):
//   "XRBCKPT\0" | u32 version | u64 config length | config text (key = value)
//   | u64 step | u32 tensor count | per tensor: u32 name length, name,
//   u32 rank, u64 dims[rank], f32 values, f32 m, f32 v
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(ModelBundle& bundle);
ModelBundle decode_checkpoint(const std::string& bytes);

void save_checkpoint(ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace dsbias
