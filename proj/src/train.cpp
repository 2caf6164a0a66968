// SPDX-License-Identifier: Apache-2.0
#include "dsbias/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dsbias/error.hpp"
#include "dsbias/imaging.hpp"
#include "dsbias/parallel.hpp"

namespace dsbias {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kOrderStream = 0x4f52444552ULL;
constexpr std::uint64_t kMixStream = 0x4d49585550ULL;

int argmax_row(const Tensor<float>& logits, std::size_t row) {
  const std::size_t c = logits.dim(1);
  const float* p = logits.data() + row * c;
  return static_cast<int>(std::max_element(p, p + c) - p);
}

}  // namespace

std::string_view task_name(TaskKind t) {
  switch (t) {
    case TaskKind::Raw:
      return "raw";
    case TaskKind::Cropped:
      return "cropped";
    case TaskKind::Semantic:
      return "semantic";
    case TaskKind::Contour:
      return "contour";
    case TaskKind::LungHeart:
      return "lung_heart";
  }
  return "raw";
}

TaskKind parse_task(std::string_view s) {
  for (auto t : {TaskKind::Raw, TaskKind::Cropped, TaskKind::Semantic, TaskKind::Contour, TaskKind::LungHeart})
    if (task_name(t) == s) return t;
  throw ConfigError("unknown task '" + std::string(s) + "' (raw, cropped, semantic, contour, lung_heart)");
}

bool task_needs_masks(TaskKind t) { return t != TaskKind::Raw; }

std::string_view shuffle_name(ShuffleMode m) {
  switch (m) {
    case ShuffleMode::Patch:
      return "patch";
    case ShuffleMode::Pixel:
      return "pixel";
    case ShuffleMode::None:
      break;
  }
  return "none";
}

ShuffleMode parse_shuffle(std::string_view s) {
  if (s == "none") return ShuffleMode::None;
  if (s == "patch") return ShuffleMode::Patch;
  if (s == "pixel") return ShuffleMode::Pixel;
  throw ConfigError("unknown shuffle mode '" + std::string(s) + "' (none, patch, pixel)");
}

std::size_t default_black_patch(std::size_t input_size) {
  switch (input_size) {
    case 224:
      return 50;
    case 64:
      return 9;
    case 32:
      return 4;
    default:
      return static_cast<std::size_t>(std::lround(50.0 * static_cast<double>(input_size) / 224.0));
  }
}

std::size_t PreprocessConfig::black_patch() const {
  if (patch_size) return *patch_size;
  return task == TaskKind::Cropped ? default_black_patch(input_size) : 0;
}

std::size_t PreprocessConfig::shuffle_tile() const {
  if (shuffle_patch) return shuffle_patch;
  return std::max<std::size_t>(1, input_size / 8);
}

void PreprocessConfig::validate() const {
  if (input_size < 1) throw InvalidInput("input size must be positive");
  if (black_patch() > input_size)
    throw InvalidInput("black patch " + std::to_string(black_patch()) + " exceeds input size " +
                       std::to_string(input_size));
  if (shuffle == ShuffleMode::Patch && input_size % shuffle_tile() != 0)
    throw InvalidInput("shuffle patch " + std::to_string(shuffle_tile()) + " does not divide input size " +
                       std::to_string(input_size));
}

GrayImage task_transform(TaskKind task, const GrayImage& img, const MaskSet* masks) {
  if (task == TaskKind::Raw) return img;
  if (!masks) throw DataError(std::string("task '") + std::string(task_name(task)) + "' needs masks");
  switch (task) {
    case TaskKind::Cropped:
      return crop_to_lungs(img, *masks).image;
    case TaskKind::Semantic:
      return render_semantic(*masks);
    case TaskKind::Contour:
      return trace_contours(*masks);
    case TaskKind::LungHeart:
      return lung_heart(img, *masks);
    case TaskKind::Raw:
      break;
  }
  return img;
}

GrayImage load_base_image(const Manifest& manifest, std::size_t record, const PreprocessConfig& cfg) {
  GrayImage img = read_pgm(manifest.image_path(record));
  std::optional<MaskSet> masks;
  if (task_needs_masks(cfg.task)) {
    const auto& r = manifest.records()[record];
    if (r.mask_dir.empty())
      throw DataError("record " + r.image_path + " has no masks but task '" + std::string(task_name(cfg.task)) +
                      "' needs them");
    masks = read_mask_set(manifest.mask_dir(record), manifest.stem(record), img.width(), img.height());
  }
  GrayImage t = task_transform(cfg.task, img, masks ? &*masks : nullptr);
  t = resize_bilinear(t, cfg.input_size, cfg.input_size);
  if (const auto p = cfg.black_patch(); p > 0) t = add_black_patches(t, p);
  return t;
}

std::vector<GrayImage> load_base_images(const Manifest& manifest, const PreprocessConfig& cfg, int jobs) {
  std::vector<GrayImage> out(manifest.size());
  parallel_for(manifest.size(), jobs, [&](std::size_t i) { out[i] = load_base_image(manifest, i, cfg); });
  return out;
}

GrayImage finalize_input(const GrayImage& base, const PreprocessConfig& cfg, bool training, std::uint64_t epoch,
                         std::uint64_t index, const AugmentPipeline* aug) {
  GrayImage img = base;
  if (cfg.shuffle != ShuffleMode::None) {
    Rng rng = Rng::derive(cfg.seed, {kShuffleStream, training ? 1u : 0u, training ? epoch : 0u, index});
    img = cfg.shuffle == ShuffleMode::Pixel ? pixel_shuffle(img, rng) : patch_shuffle(img, cfg.shuffle_tile(), rng);
  }
  GrayImage f = img.as_f32();
  if (img.domain() == PixelDomain::U8)
    for (auto& v : f.pixels()) v /= 255.0f;
  if (training && aug && !aug->empty()) f = aug->apply(f, epoch, index);
  return zscore_normalize(f).image;
}

Tensor<float> to_batch(const std::vector<GrayImage>& images) {
  if (images.empty()) throw InvalidInput("to_batch: no images");
  const std::size_t w = images[0].width(), h = images[0].height();
  Tensor<float> t({images.size(), 1, h, w});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width() != w || images[i].height() != h) throw InvalidInput("to_batch: image sizes differ");
    std::copy(images[i].pixels().begin(), images[i].pixels().end(), t.data() + i * w * h);
  }
  return t;
}

std::string metrics_csv(const std::vector<EpochRecord>& history, std::size_t n_classes) {
  std::string out = "epoch,split,loss,macro_f1";
  for (std::size_t k = 0; k < n_classes; ++k) out += ",f1_class" + std::to_string(k);
  out += "\n";
  char buf[64];
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + r.split;
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f", r.loss, r.metrics.macro_f1);
    out += buf;
    for (std::size_t k = 0; k < n_classes; ++k) {
      std::snprintf(buf, sizeof buf, ",%.6f", k < r.metrics.f1.size() ? r.metrics.f1[k] : 0.0);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

EvalResult evaluate(Network<float>& net, const std::vector<GrayImage>& bases, const std::vector<int>& labels,
                    const PreprocessConfig& prep, std::size_t n_classes, std::size_t batch_size, int jobs) {
  if (bases.empty()) throw DataError("evaluate: empty split");
  if (bases.size() != labels.size()) throw InvalidInput("evaluate: images and labels differ in length");
  batch_size = std::max<std::size_t>(1, batch_size);
  EvalResult res;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < bases.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, bases.size() - start);
    std::vector<GrayImage> imgs(n);
    parallel_for(n, jobs, [&](std::size_t j) { imgs[j] = finalize_input(bases[start + j], prep, false, 0, start + j, nullptr); });
    const std::vector<int> y(labels.begin() + static_cast<std::ptrdiff_t>(start),
                             labels.begin() + static_cast<std::ptrdiff_t>(start + n));
    const Tensor<float> logits = net.forward(to_batch(imgs));
    loss_sum += cross_entropy(logits, y).loss * static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) res.preds.push_back(argmax_row(logits, j));
  }
  res.labels = labels;
  res.loss = loss_sum / static_cast<double>(bases.size());
  res.metrics = f1_scores(res.preds, res.labels, n_classes);
  return res;
}

EvalResult evaluate(Network<float>& net, const Manifest& manifest, const PreprocessConfig& prep,
                    std::size_t n_classes, std::size_t batch_size, int jobs) {
  std::vector<int> labels(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) labels[i] = manifest.label(i);
  return evaluate(net, load_base_images(manifest, prep, jobs), labels, prep, n_classes, batch_size, jobs);
}

TrainResult train(const Manifest& manifest, const TrainOptions& opts) {
  opts.model.validate();
  opts.train.validate();
  opts.prep.validate();
  if (opts.prep.input_size != opts.model.input_size)
    throw ConfigError("preprocessing input size differs from model input size");
  if (manifest.labels().size() != opts.model.n_classes)
    throw ConfigError("manifest has " + std::to_string(manifest.labels().size()) + " datasets but model.n_classes = " +
                      std::to_string(opts.model.n_classes));
  for (const auto& s : opts.augment.specs) s.validate();

  const Manifest train_m = manifest.filter(Split::Train);
  const Manifest test_m = manifest.filter(Split::Test);
  if (train_m.size() == 0) throw DataError("train split is empty");

  const std::size_t n_classes = opts.model.n_classes;
  const auto train_x = load_base_images(train_m, opts.prep, opts.jobs);
  const auto test_x = load_base_images(test_m, opts.prep, opts.jobs);
  std::vector<int> train_y(train_m.size()), test_y(test_m.size());
  for (std::size_t i = 0; i < train_m.size(); ++i) train_y[i] = train_m.label(i);
  for (std::size_t i = 0; i < test_m.size(); ++i) test_y[i] = test_m.label(i);

  TrainResult res;
  res.labels = manifest.labels();
  res.net = build_network<float>(opts.model);
  res.opt = AdamState<float>::zeros(res.net.params());

  const auto& tc = opts.train;
  const std::size_t n = train_x.size();
  const std::size_t steps_per_epoch = (n + tc.batch_size - 1) / tc.batch_size;
  const std::size_t total_steps = steps_per_epoch * tc.epochs;
  const AugmentPipeline* aug = opts.augment.empty() ? nullptr : &opts.augment;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const auto order = Rng::derive(tc.seed, {kOrderStream, epoch}).permutation(n);
    double loss_sum = 0.0;
    std::vector<int> preds, seen;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t start = b * tc.batch_size;
      const std::size_t bn = std::min(tc.batch_size, n - start);
      LabeledBatch batch;
      batch.images.resize(bn);
      batch.labels.resize(bn);
      parallel_for(bn, opts.jobs, [&](std::size_t j) {
        const std::size_t idx = order[start + j];
        batch.images[j] = finalize_input(train_x[idx], opts.prep, true, epoch, idx, aug);
      });
      for (std::size_t j = 0; j < bn; ++j) batch.labels[j] = train_y[order[start + j]];

      res.net.zero_grad();
      Tensor<float> logits;
      LossResult<float> lr_res;
      if (tc.mixup) {
        Rng mrng = Rng::derive(tc.seed, {kMixStream, epoch, b});
        const auto partner = mrng.permutation(bn);
        LabeledBatch other;
        for (auto p : partner) {
          other.images.push_back(batch.images[p]);
          other.labels.push_back(batch.labels[p]);
        }
        const MixedBatch mixed = mixup(batch, other, tc.mixup_alpha, mrng);
        logits = res.net.forward(to_batch(mixed.images));
        Tensor<float> soft({bn, n_classes});
        for (std::size_t j = 0; j < bn; ++j) {
          soft[j * n_classes + static_cast<std::size_t>(mixed.labels_a[j])] += static_cast<float>(mixed.lambdas[j]);
          soft[j * n_classes + static_cast<std::size_t>(mixed.labels_b[j])] += static_cast<float>(1.0 - mixed.lambdas[j]);
        }
        lr_res = soft_cross_entropy(logits, soft);
      } else {
        logits = res.net.forward(to_batch(batch.images));
        lr_res = cross_entropy(logits, batch.labels);
      }
      res.net.backward(lr_res.grad);
      adamw_step(res.net.params(), res.opt, lr_schedule(step, total_steps, tc), tc);
      ++step;

      loss_sum += lr_res.loss * static_cast<double>(bn);
      for (std::size_t j = 0; j < bn; ++j) {
        preds.push_back(argmax_row(logits, j));
        seen.push_back(batch.labels[j]);
      }
    }
    EpochRecord tr{epoch + 1, "train", loss_sum / static_cast<double>(n), f1_scores(preds, seen, n_classes)};
    res.history.push_back(tr);
    if (opts.on_epoch) opts.on_epoch(tr);

    if (!test_x.empty() && (opts.eval_each_epoch || epoch + 1 == tc.epochs)) {
      const auto ev = evaluate(res.net, test_x, test_y, opts.prep, n_classes, tc.batch_size, opts.jobs);
      EpochRecord te{epoch + 1, "test", ev.loss, ev.metrics};
      res.history.push_back(te);
      if (opts.on_epoch) opts.on_epoch(te);
    }
  }
  return res;
}

}  // namespace dsbias
