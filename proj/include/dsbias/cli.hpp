// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dsbias/config.hpp"
#include "dsbias/train.hpp"

namespace dsbias {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// Fully resolved training run read from a key/value document.
struct RunConfig {
  std::string manifest;
  std::string output_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
  TrainOptions options;

  /// Reads every key and rejects unknown ones. `manifest_labels` supplies the
  /// default model.n_classes (0 keeps the built-in default).
  static RunConfig from_doc(const KeyValueDoc& doc, std::size_t manifest_labels = 0);
  static RunConfig load(const std::string& path);
  /// Canonical text with every default made explicit.
  std::string resolved() const;
};

/// Black patch for the ablation `base` size (given at 224) at `input_size`,
/// using the fixed 50 -> {64: 9, 32: 4} pairs and proportional scaling otherwise.
std::size_t scaled_black_patch(std::size_t base, std::size_t input_size);

/// Applies the named ablation (patch50, patch70, size32, size64,
/// patch_shuffle, pixel_shuffle) to a run configuration.
void apply_ablation(RunConfig& cfg, const std::string& mode);

/// Entry point of the `dsbias` tool. Errors are written to `err` as one JSON
/// line and mapped to exit codes 2 (config), 3 (data) and 4 (numeric).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dsbias
