// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsbias/augment.hpp"
#include "dsbias/data.hpp"
#include "dsbias/masks.hpp"
#include "dsbias/metrics.hpp"
#include "dsbias/network.hpp"
#include "dsbias/optim.hpp"

namespace dsbias {

enum class TaskKind { Raw, Cropped, Semantic, Contour, LungHeart };

std::string_view task_name(TaskKind t);
TaskKind parse_task(std::string_view s);
bool task_needs_masks(TaskKind t);

enum class ShuffleMode { None, Patch, Pixel };

std::string_view shuffle_name(ShuffleMode m);
ShuffleMode parse_shuffle(std::string_view s);

/// Black patch edge length at a model input size: 224 -> 50, 64 -> 9, 32 -> 4,
/// otherwise round(50 * size / 224).
std::size_t default_black_patch(std::size_t input_size);

struct PreprocessConfig {
  TaskKind task = TaskKind::Cropped;
  std::size_t input_size = 224;
  std::optional<std::size_t> patch_size;  // unset: default for cropped, 0 otherwise
  ShuffleMode shuffle = ShuffleMode::None;
  std::size_t shuffle_patch = 0;  // 0: input_size / 8
  std::uint64_t seed = 0;         // shuffle streams

  std::size_t black_patch() const;
  std::size_t shuffle_tile() const;
  void validate() const;
};

/// Task view of one image. `masks` may be null only for TaskKind::Raw.
GrayImage task_transform(TaskKind task, const GrayImage& img, const MaskSet* masks);

/// Load, task transform, resize to the input size and black patches. The
/// result is a U8 image that does not depend on epoch or augmentation.
GrayImage load_base_image(const Manifest& manifest, std::size_t record, const PreprocessConfig& cfg);
std::vector<GrayImage> load_base_images(const Manifest& manifest, const PreprocessConfig& cfg, int jobs);

/// Shuffle ablation, scaling to [0,1], optional augmentation, per-image z-score.
/// Training draws fresh shuffles per epoch; evaluation uses one fixed stream
/// per image index.
GrayImage finalize_input(const GrayImage& base, const PreprocessConfig& cfg, bool training, std::uint64_t epoch,
                         std::uint64_t index, const AugmentPipeline* aug);

/// Packs images of equal size into an (N, 1, S, S) tensor.
Tensor<float> to_batch(const std::vector<GrayImage>& images);

struct EpochRecord {
  std::size_t epoch = 0;
  std::string split;  // train | test
  double loss = 0.0;
  Metrics metrics;
};

/// `epoch,split,loss,macro_f1,f1_class0..f1_class<N-1>`
std::string metrics_csv(const std::vector<EpochRecord>& history, std::size_t n_classes);

struct TrainOptions {
  PreprocessConfig prep;
  ModelConfig model;
  TrainConfig train;
  AugmentPipeline augment;  // empty: none
  int jobs = 1;
  bool eval_each_epoch = true;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Network<float> net;
  AdamState<float> opt;
  std::vector<EpochRecord> history;
  std::vector<std::string> labels;
};

/// Trains on the train split and evaluates the test split after every epoch.
TrainResult train(const Manifest& manifest, const TrainOptions& opts);

struct EvalResult {
  double loss = 0.0;
  Metrics metrics;
  std::vector<int> preds;
  std::vector<int> labels;
};

/// One pass over `manifest` in record order.
EvalResult evaluate(Network<float>& net, const Manifest& manifest, const PreprocessConfig& prep,
                    std::size_t n_classes, std::size_t batch_size, int jobs);
/// Same with preloaded base images.
EvalResult evaluate(Network<float>& net, const std::vector<GrayImage>& bases, const std::vector<int>& labels,
                    const PreprocessConfig& prep, std::size_t n_classes, std::size_t batch_size, int jobs);

}  // namespace dsbias
