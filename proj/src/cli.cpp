// SPDX-License-Identifier: Apache-2.0
#include "dsbias/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <ostream>
#include <set>

#include "dsbias/checkpoint.hpp"
#include "dsbias/error.hpp"
#include "dsbias/explain.hpp"
#include "dsbias/imaging.hpp"
#include "dsbias/parallel.hpp"
#include "dsbias/stats.hpp"
#include "dsbias/synth.hpp"

namespace fs = std::filesystem;

namespace dsbias {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t get_size(const KeyValueDoc& doc, const std::string& key, std::size_t fallback) {
  const long long v = doc.get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError("key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

std::uint64_t get_seed(const KeyValueDoc& doc, const std::string& key, std::uint64_t fallback) {
  return static_cast<std::uint64_t>(doc.get_int(key, static_cast<long long>(fallback)));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("failed writing " + path.string());
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

bool is_index(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

GrayImage read_gray(const fs::path& path) {
  if (path.extension() == ".ppm") {
    const ColorImage c = read_ppm(path);
    GrayImage g = GrayImage::u8(c.width, c.height);
    for (std::size_t i = 0; i < g.size(); ++i)
      g.pixels()[i] = static_cast<float>(
          std::lround(0.299 * c.rgb[3 * i] + 0.587 * c.rgb[3 * i + 1] + 0.114 * c.rgb[3 * i + 2]));
    return g;
  }
  return read_pgm(path);
}

// Output location of one record when a command materialises a new corpus.
std::string out_image_rel(const DatasetRecord& r, const std::string& stem) {
  return "images/" + r.dataset + "/" + stem + ".pgm";
}

void check_unique_stems(const Manifest& m) {
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!seen.insert({m.records()[i].dataset, m.stem(i)}).second)
      throw DataError("duplicate image name '" + m.stem(i) + "' in dataset '" + m.records()[i].dataset + "'");
}

// Labels of `m` expressed in the checkpoint's label order.
std::vector<int> labels_in(const Manifest& m, const std::vector<std::string>& labels) {
  std::vector<int> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto it = std::find(labels.begin(), labels.end(), m.records()[i].dataset);
    if (it == labels.end()) throw DataError("dataset '" + m.records()[i].dataset + "' unknown to the checkpoint");
    out[i] = static_cast<int>(it - labels.begin());
  }
  return out;
}

Manifest select_split(const Manifest& m, const std::string& split) {
  if (split == "all") return m;
  return m.filter(parse_split(split));
}

int run_training(RunConfig cfg, std::ostream& out) {
  const Manifest manifest = Manifest::load(cfg.manifest);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_text(dir / "resolved_config.txt", cfg.resolved());
  cfg.options.jobs = cfg.jobs;
  char buf[160];
  cfg.options.on_epoch = [&](const EpochRecord& r) {
    std::snprintf(buf, sizeof buf, "epoch %zu %-5s loss %.4f macro_f1 %.4f\n", r.epoch, r.split.c_str(), r.loss,
                  r.metrics.macro_f1);
    out << buf << std::flush;
  };
  TrainResult res = train(manifest, cfg.options);
  write_text(dir / "metrics.csv", metrics_csv(res.history, cfg.options.model.n_classes));
  ModelBundle bundle{cfg.options.model, cfg.options.prep, res.labels, std::move(res.net), std::move(res.opt)};
  save_checkpoint(bundle, dir / "model.ckpt");
  out << "wrote " << (dir / "model.ckpt").string() << "\n";
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------- RunConfig

RunConfig RunConfig::from_doc(const KeyValueDoc& doc, std::size_t manifest_labels) {
  RunConfig c;
  c.manifest = doc.require_string("manifest");
  c.output_dir = doc.require_string("output_dir");
  c.seed = get_seed(doc, "seed", 0);
  c.jobs = static_cast<int>(std::max<long long>(1, doc.get_int("jobs", 1)));

  auto& o = c.options;
  o.prep.task = parse_task(doc.get_string("task", "cropped"));

  auto& m = o.model;
  m.arch = doc.get_string("model.arch", m.arch);
  m.input_size = get_size(doc, "model.input_size", m.input_size);
  for (auto ch : doc.get_int_list("model.channels", {})) {
    if (ch <= 0) throw ConfigError("model.channels entries must be positive");
    m.channels.push_back(static_cast<std::size_t>(ch));
  }
  m.hidden = get_size(doc, "model.hidden", m.hidden);
  m.n_classes = get_size(doc, "model.n_classes", manifest_labels ? manifest_labels : m.n_classes);
  m.seed = get_seed(doc, "model.seed", c.seed);

  auto& t = o.train;
  t.lr = doc.get_double("train.lr", t.lr);
  t.weight_decay = doc.get_double("train.weight_decay", t.weight_decay);
  t.batch_size = get_size(doc, "train.batch_size", t.batch_size);
  t.epochs = get_size(doc, "train.epochs", t.epochs);
  t.scheduler = doc.get_string("train.scheduler", t.scheduler);
  t.warmup_steps = get_size(doc, "train.warmup_steps", t.warmup_steps);
  t.beta1 = doc.get_double("train.beta1", t.beta1);
  t.beta2 = doc.get_double("train.beta2", t.beta2);
  t.eps = doc.get_double("train.eps", t.eps);
  t.mixup = doc.get_bool("train.mixup", t.mixup);
  t.mixup_alpha = doc.get_double("train.mixup_alpha", t.mixup_alpha);
  t.seed = get_seed(doc, "train.seed", c.seed);

  auto& p = o.prep;
  p.input_size = m.input_size;
  if (doc.contains("ablation.patch_size")) p.patch_size = get_size(doc, "ablation.patch_size", 0);
  p.shuffle = parse_shuffle(doc.get_string("ablation.shuffle", "none"));
  p.shuffle_patch = get_size(doc, "ablation.shuffle_patch", 0);
  p.seed = get_seed(doc, "ablation.seed", c.seed);

  const std::uint64_t aug_seed = get_seed(doc, "augment.seed", c.seed);
  const std::string preset = doc.get_string("augment.preset", "none");
  if (preset == "all13") {
    const double prob = doc.get_double("augment.prob", 0.5);
    const std::string mode = doc.get_string("augment.prob_mode", "noise_only");
    if (mode != "noise_only" && mode != "all") throw ConfigError("augment.prob_mode must be noise_only or all");
    o.augment = AugmentPipeline::preset13(prob, mode == "all", aug_seed);
  } else if (preset != "none") {
    throw ConfigError("augment.preset must be none or all13, got '" + preset + "'");
  }
  std::set<long long> indices;
  for (const auto& key : doc.keys_with_prefix("augment.")) {
    const std::string rest = key.substr(8);
    const auto dot = rest.find('.');
    if (dot != std::string::npos && is_index(rest.substr(0, dot))) indices.insert(std::stoll(rest.substr(0, dot)));
  }
  if (!indices.empty() && preset != "none") throw ConfigError("augment.preset and an explicit augment list are exclusive");
  for (long long i : indices) {
    const std::string pre = "augment." + std::to_string(i) + ".";
    const AugmentKind kind = parse_augment_kind(doc.require_string(pre + "kind"));
    const double prob = doc.get_double(pre + "prob", 0.5);
    std::map<std::string, double> overrides;
    for (const auto& key : doc.keys_with_prefix(pre)) {
      const std::string name = key.substr(pre.size());
      if (name != "kind" && name != "prob") overrides[name] = doc.get_double(key, 0.0);
    }
    if (kind == AugmentKind::MixUp) {
      t.mixup = true;
      const AugmentSpec s = AugmentSpec::make(kind, prob, overrides);
      t.mixup_alpha = s.param("alpha");
      continue;
    }
    o.augment.specs.push_back(AugmentSpec::make(kind, prob, overrides));
  }
  o.augment.seed = aug_seed;
  doc.check_all_used();

  m.validate();
  t.validate();
  p.validate();
  for (const auto& s : o.augment.specs) s.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  const KeyValueDoc doc = KeyValueDoc::load(path);
  std::size_t labels = 0;
  if (const auto mpath = doc.get("manifest"); mpath && !doc.contains("model.n_classes"))
    labels = Manifest::load(*mpath).labels().size();
  return from_doc(doc, labels);
}

std::string RunConfig::resolved() const {
  KeyValueDoc d;
  const auto& o = options;
  d.set("manifest", manifest);
  d.set("output_dir", output_dir);
  d.set("seed", std::to_string(seed));
  d.set("task", std::string(task_name(o.prep.task)));
  d.set("model.arch", o.model.arch);
  d.set("model.input_size", std::to_string(o.model.input_size));
  d.set("model.channels", join_sizes(o.model.stage_channels()));
  d.set("model.hidden", std::to_string(o.model.hidden));
  d.set("model.n_classes", std::to_string(o.model.n_classes));
  d.set("model.seed", std::to_string(o.model.seed));
  d.set("train.lr", fmt_double(o.train.lr));
  d.set("train.weight_decay", fmt_double(o.train.weight_decay));
  d.set("train.batch_size", std::to_string(o.train.batch_size));
  d.set("train.epochs", std::to_string(o.train.epochs));
  d.set("train.scheduler", o.train.scheduler);
  d.set("train.warmup_steps", std::to_string(o.train.warmup_steps));
  d.set("train.beta1", fmt_double(o.train.beta1));
  d.set("train.beta2", fmt_double(o.train.beta2));
  d.set("train.eps", fmt_double(o.train.eps));
  d.set("train.mixup", o.train.mixup ? "true" : "false");
  d.set("train.mixup_alpha", fmt_double(o.train.mixup_alpha));
  d.set("train.seed", std::to_string(o.train.seed));
  d.set("ablation.patch_size", std::to_string(o.prep.black_patch()));
  d.set("ablation.shuffle", std::string(shuffle_name(o.prep.shuffle)));
  d.set("ablation.shuffle_patch", std::to_string(o.prep.shuffle_tile()));
  d.set("ablation.seed", std::to_string(o.prep.seed));
  d.set("augment.seed", std::to_string(o.augment.seed));
  for (std::size_t i = 0; i < o.augment.specs.size(); ++i) {
    const auto& s = o.augment.specs[i];
    const std::string pre = "augment." + std::to_string(i) + ".";
    d.set(pre + "kind", std::string(augment_name(s.kind)));
    d.set(pre + "prob", fmt_double(s.prob));
    for (const auto& [k, v] : s.params) d.set(pre + k, fmt_double(v));
  }
  return d.serialize();
}

std::size_t scaled_black_patch(std::size_t base, std::size_t input_size) {
  if (input_size == 224) return base;
  if (base == 50) return default_black_patch(input_size);
  return static_cast<std::size_t>(std::lround(static_cast<double>(base) * static_cast<double>(input_size) / 224.0));
}

void apply_ablation(RunConfig& cfg, const std::string& mode) {
  auto& o = cfg.options;
  if (mode == "patch50" || mode == "patch70") {
    o.prep.patch_size = scaled_black_patch(mode == "patch50" ? 50 : 70, o.model.input_size);
  } else if (mode == "size32" || mode == "size64") {
    const std::size_t s = mode == "size32" ? 32 : 64;
    o.model.input_size = s;
    o.prep.input_size = s;
    o.prep.patch_size = default_black_patch(s);
    if (o.prep.shuffle_patch && s % o.prep.shuffle_patch) o.prep.shuffle_patch = 0;
  } else if (mode == "patch_shuffle") {
    o.prep.shuffle = ShuffleMode::Patch;
  } else if (mode == "pixel_shuffle") {
    o.prep.shuffle = ShuffleMode::Pixel;
  } else {
    throw ConfigError("unknown ablation mode '" + mode +
                      "' (patch50, patch70, size32, size64, patch_shuffle, pixel_shuffle)");
  }
  o.model.validate();
  o.prep.validate();
  cfg.output_dir = (fs::path(cfg.output_dir) / ("ablate_" + mode)).string();
}

// ---------------------------------------------------------------- commands

namespace {

struct Args {
  int jobs = 0;  // 0: from config or 1
  std::string spec, manifest, out, config, task, checkpoint, split = "test", mode, klass = "label";
  double ratio = 0.8;
  std::uint64_t seed = 0;
  std::size_t per_dataset = 0, size = 512, bins = 256, limit = 0;
  int quality = 90;
};

int jobs_or(const Args& a, int fallback) { return a.jobs > 0 ? a.jobs : std::max(1, fallback); }

int cmd_synth(const Args& a, std::ostream& out) {
  const KeyValueDoc doc = KeyValueDoc::load(a.spec);
  const SynthSpec spec = SynthSpec::from_config(doc);
  doc.check_all_used();
  const fs::path dir = a.out;
  fs::create_directories(dir);
  write_text(dir / "resolved_config.txt", doc.serialize());
  const Manifest m = synth_generate(spec, dir, jobs_or(a, 1));
  out << "wrote " << m.size() << " images to " << (dir / "manifest.csv").string() << "\n";
  return kExitOk;
}

int cmd_prepare(const Args& a, std::ostream& out) {
  if (a.size < 1) throw ConfigError("--size must be positive");
  const Manifest in = Manifest::load(a.manifest);
  check_unique_stems(in);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  KeyValueDoc resolved;
  resolved.set("command", "prepare");
  resolved.set("manifest", a.manifest);
  resolved.set("size", std::to_string(a.size));
  resolved.set("quality", std::to_string(a.quality));
  write_text(dir / "resolved_config.txt", resolved.serialize());

  std::vector<DatasetRecord> records(in.size());
  parallel_for(in.size(), jobs_or(a, 1), [&](std::size_t i) {
    DatasetRecord r = in.records()[i];
    const std::string stem = in.stem(i);
    const GrayImage src = read_gray(in.image_path(i));
    const GrayImage img = reencode_lossy(resize_bilinear(src, a.size, a.size), a.quality);
    r.image_path = out_image_rel(r, stem);
    write_pgm(img, dir / r.image_path);
    if (!r.mask_dir.empty()) {
      const MaskSet ms = read_mask_set(in.mask_dir(i), stem, src.width(), src.height());
      r.mask_dir = "masks/" + r.dataset;
      write_mask_set(resize_masks(ms, a.size, a.size), dir / r.mask_dir, stem);
    }
    records[i] = std::move(r);
  });
  Manifest result(std::move(records), dir);
  result.save(dir / "manifest.csv");
  out << "prepared " << result.size() << " images in " << dir.string() << "\n";
  return kExitOk;
}

int cmd_transform(const Args& a, std::ostream& out) {
  const TaskKind task = parse_task(a.task);
  const Manifest in = Manifest::load(a.manifest);
  check_unique_stems(in);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  KeyValueDoc resolved;
  resolved.set("command", "transform");
  resolved.set("manifest", a.manifest);
  resolved.set("task", std::string(task_name(task)));
  write_text(dir / "resolved_config.txt", resolved.serialize());

  std::vector<DatasetRecord> records(in.size());
  parallel_for(in.size(), jobs_or(a, 1), [&](std::size_t i) {
    DatasetRecord r = in.records()[i];
    const std::string stem = in.stem(i);
    const GrayImage img = read_gray(in.image_path(i));
    std::optional<MaskSet> ms;
    if (task_needs_masks(task)) {
      if (r.mask_dir.empty()) throw DataError("record " + r.image_path + " has no masks");
      ms = read_mask_set(in.mask_dir(i), stem, img.width(), img.height());
    }
    const GrayImage t = task_transform(task, img, ms ? &*ms : nullptr);
    r.image_path = out_image_rel(r, stem);
    r.mask_dir.clear();
    write_pgm(t.to_u8(), dir / r.image_path);
    records[i] = std::move(r);
  });
  Manifest result(std::move(records), dir);
  result.save(dir / "manifest.csv");
  out << "transformed " << result.size() << " images (" << task_name(task) << ") in " << dir.string() << "\n";
  return kExitOk;
}

int cmd_split(const Args& a, std::ostream& out) {
  const Manifest in = Manifest::load(a.manifest);
  Manifest m = in;
  if (a.per_dataset > 0) {
    Rng rs = Rng::derive(a.seed, {1});
    m = balanced_sample(m, a.per_dataset, rs);
  }
  Rng rp = Rng::derive(a.seed, {2});
  m = patient_split(m, a.ratio, rp);
  Rng rm = Rng::derive(a.seed, {3});
  m = merge_shuffle({m}, rm);

  // Re-express paths relative to the output manifest's directory.
  const fs::path out_path = a.out;
  const fs::path out_dir = fs::absolute(out_path).parent_path();
  const fs::path in_dir = fs::absolute(in.base_dir());
  std::vector<DatasetRecord> records = m.records();
  if (fs::weakly_canonical(out_dir) != fs::weakly_canonical(in_dir))
    for (auto& r : records) {
      r.image_path = fs::relative(fs::weakly_canonical(in_dir / r.image_path), fs::weakly_canonical(out_dir)).generic_string();
      if (!r.mask_dir.empty())
        r.mask_dir = fs::relative(fs::weakly_canonical(in_dir / r.mask_dir), fs::weakly_canonical(out_dir)).generic_string();
    }
  Manifest result(std::move(records), out_dir);
  result.save(out_path);

  KeyValueDoc resolved;
  resolved.set("command", "split");
  resolved.set("manifest", a.manifest);
  resolved.set("ratio", fmt_double(a.ratio));
  resolved.set("seed", std::to_string(a.seed));
  resolved.set("per_dataset", std::to_string(a.per_dataset));
  write_text(out_path.string() + ".resolved_config.txt", resolved.serialize());
  std::size_t train_n = result.filter(Split::Train).size();
  out << "split " << result.size() << " records: " << train_n << " train, " << result.size() - train_n
      << " test -> " << out_path.string() << "\n";
  return kExitOk;
}

int cmd_train(const Args& a, std::ostream& out) {
  RunConfig cfg = RunConfig::load(a.config);
  cfg.jobs = jobs_or(a, cfg.jobs);
  return run_training(std::move(cfg), out);
}

int cmd_ablate(const Args& a, std::ostream& out) {
  RunConfig cfg = RunConfig::load(a.config);
  cfg.jobs = jobs_or(a, cfg.jobs);
  apply_ablation(cfg, a.mode);
  return run_training(std::move(cfg), out);
}

int cmd_eval(const Args& a, std::ostream& out) {
  ModelBundle b = load_checkpoint(a.checkpoint);
  const Manifest m = select_split(Manifest::load(a.manifest), a.split);
  if (m.size() == 0) throw DataError("no records in split '" + a.split + "'");
  const fs::path dir = a.out;
  fs::create_directories(dir);
  KeyValueDoc resolved;
  resolved.set("command", "eval");
  resolved.set("checkpoint", a.checkpoint);
  resolved.set("manifest", a.manifest);
  resolved.set("split", a.split);
  write_text(dir / "resolved_config.txt", resolved.serialize());

  const auto labels = labels_in(m, b.labels);
  const int jobs = jobs_or(a, 1);
  const auto ev = evaluate(b.net, load_base_images(m, b.prep, jobs), labels, b.prep, b.model.n_classes, 64, jobs);
  write_text(dir / "eval_metrics.csv", metrics_csv({EpochRecord{0, a.split, ev.loss, ev.metrics}}, b.model.n_classes));
  std::string preds = "index,image_path,label,pred\n";
  for (std::size_t i = 0; i < m.size(); ++i)
    preds += std::to_string(i) + "," + m.records()[i].image_path + "," + std::to_string(ev.labels[i]) + "," +
             std::to_string(ev.preds[i]) + "\n";
  write_text(dir / "predictions.csv", preds);
  char buf[96];
  std::snprintf(buf, sizeof buf, "eval %s: n %zu loss %.4f macro_f1 %.4f\n", a.split.c_str(), m.size(), ev.loss,
                ev.metrics.macro_f1);
  out << buf;
  return kExitOk;
}

int cmd_stats(const Args& a, std::ostream& out) {
  const Manifest m = Manifest::load(a.manifest);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  KeyValueDoc resolved;
  resolved.set("command", "stats");
  resolved.set("manifest", a.manifest);
  resolved.set("bins", std::to_string(a.bins));
  write_text(dir / "resolved_config.txt", resolved.serialize());
  const int jobs = jobs_or(a, 1);
  const auto cs = dataset_class_stats(m, jobs);
  write_text(dir / "class_stats.csv", class_stats_csv(cs));
  const auto dr = distribution_report(m, a.bins, jobs);
  write_text(dir / "distribution.csv", distribution_csv(dr));
  write_text(dir / "distribution.svg", distribution_svg(dr));
  for (const auto& w : cs.warnings) out << "warning: " << w << "\n";
  out << "stats over " << cs.images << " images (" << cs.skipped << " without masks) in " << dir.string() << "\n";
  return kExitOk;
}

int cmd_explain(const Args& a, std::ostream& out) {
  if (a.mode != "last" && a.mode != "all") throw ConfigError("--mode must be last or all");
  if (a.klass != "label" && a.klass != "pred") throw ConfigError("--class must be label or pred");
  ModelBundle b = load_checkpoint(a.checkpoint);
  const Manifest m = select_split(Manifest::load(a.manifest), a.split);
  if (m.size() == 0) throw DataError("no records in split '" + a.split + "'");
  check_unique_stems(m);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  KeyValueDoc resolved;
  resolved.set("command", "explain");
  resolved.set("checkpoint", a.checkpoint);
  resolved.set("manifest", a.manifest);
  resolved.set("split", a.split);
  resolved.set("mode", a.mode);
  resolved.set("class", a.klass);
  resolved.set("limit", std::to_string(a.limit));
  write_text(dir / "resolved_config.txt", resolved.serialize());

  const auto labels = labels_in(m, b.labels);
  const std::size_t n = a.limit ? std::min(a.limit, m.size()) : m.size();
  std::vector<std::string> rows(n);
  const int jobs = jobs_or(a, 1);
  parallel_for(n, jobs, [&](std::size_t i) {
    Network<float> net = b.net;
    const GrayImage input = finalize_input(load_base_image(m, i, b.prep), b.prep, false, 0, i, nullptr);
    const Tensor<float> logits = net.forward(to_batch({input}));
    const int pred = static_cast<int>(std::max_element(logits.data(), logits.data() + logits.numel()) - logits.data());
    const int cls = a.klass == "label" ? labels[i] : pred;
    const Heatmap h = a.mode == "last" ? gradcam(net, input, cls) : gradcam_all_layers(net, input, cls);
    const std::string base = m.records()[i].dataset + "_" + m.stem(i);
    overlay_export(h, input, dir / (base + ".overlay.ppm"));
    write_text(dir / (base + ".heatmap.csv"), heatmap_csv(h));
    rows[i] = std::to_string(i) + "," + m.records()[i].image_path + "," + std::to_string(labels[i]) + "," +
              std::to_string(pred) + "," + std::to_string(cls) + "," + (h.degenerate ? "1" : "0") + "\n";
  });
  std::string summary = "index,image_path,label,pred,class,degenerate\n";
  for (const auto& r : rows) summary += r;
  write_text(dir / "explain.csv", summary);
  out << "explained " << n << " images (" << a.mode << ") in " << dir.string() << "\n";
  return kExitOk;
}

int exit_code_for(const std::string& category) {
  if (category == "config") return kExitConfig;
  if (category == "numeric") return kExitNumeric;
  return kExitData;
}

void emit_error(std::ostream& err, const std::string& command, const std::string& category, const std::string& msg) {
  nlohmann::json j = {{"status", "error"},
                      {"command", command},
                      {"category", category},
                      {"exit_code", exit_code_for(category)},
                      {"message", msg}};
  err << j.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dataset-bias toolkit for chest radiograph corpora", "dsbias"};
  app.require_subcommand(1);
  Args a;
  auto jobs = [&](CLI::App* s) { s->add_option("--jobs", a.jobs, "Worker threads (results do not depend on it)"); };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-source corpus");
  synth->add_option("--spec", a.spec, "Synthesis spec (key = value)")->required();
  synth->add_option("--out", a.out, "Output directory")->required();
  jobs(synth);

  auto* prepare = app.add_subcommand("prepare", "Canonicalise images: grayscale, resize, lossy re-encode");
  prepare->add_option("--manifest", a.manifest)->required();
  prepare->add_option("--out", a.out, "Output directory")->required();
  prepare->add_option("--size", a.size, "Square output size")->capture_default_str();
  prepare->add_option("--quality", a.quality, "Codec quality 1..100")->capture_default_str();
  jobs(prepare);

  auto* transform = app.add_subcommand("transform", "Materialise a task view of a corpus");
  transform->add_option("--manifest", a.manifest)->required();
  transform->add_option("--task", a.task, "raw|cropped|semantic|contour|lung_heart")->required();
  transform->add_option("--out", a.out, "Output directory")->required();
  jobs(transform);

  auto* split = app.add_subcommand("split", "Balanced sampling and patient-disjoint train/test split");
  split->add_option("--manifest", a.manifest)->required();
  split->add_option("--out", a.out, "Output manifest path")->required();
  split->add_option("--ratio", a.ratio, "Train fraction of patients")->capture_default_str();
  split->add_option("--seed", a.seed)->capture_default_str();
  split->add_option("--per-dataset", a.per_dataset, "Images kept per dataset (0: all)")->capture_default_str();
  jobs(split);

  auto* trainc = app.add_subcommand("train", "Train a dataset-provenance classifier");
  trainc->add_option("--config", a.config, "Run config (key = value)")->required();
  jobs(trainc);

  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint");
  evalc->add_option("--checkpoint", a.checkpoint)->required();
  evalc->add_option("--manifest", a.manifest)->required();
  evalc->add_option("--split", a.split, "train|test|all")->capture_default_str();
  evalc->add_option("--out", a.out, "Output directory")->required();
  jobs(evalc);

  auto* stats = app.add_subcommand("stats", "Per-dataset class fractions and intensity distributions");
  stats->add_option("--manifest", a.manifest)->required();
  stats->add_option("--out", a.out, "Output directory")->required();
  stats->add_option("--bins", a.bins)->capture_default_str();
  jobs(stats);

  auto* explain = app.add_subcommand("explain", "Grad-CAM overlays and heatmaps");
  explain->add_option("--checkpoint", a.checkpoint)->required();
  explain->add_option("--manifest", a.manifest)->required();
  explain->add_option("--mode", a.mode, "last|all")->required();
  explain->add_option("--out", a.out, "Output directory")->required();
  explain->add_option("--split", a.split, "train|test|all")->capture_default_str();
  explain->add_option("--class", a.klass, "label|pred")->capture_default_str();
  explain->add_option("--limit", a.limit, "Images to explain (0: all)")->capture_default_str();
  jobs(explain);

  auto* ablate = app.add_subcommand("ablate", "Train with one ablation applied");
  ablate->add_option("--config", a.config, "Run config (key = value)")->required();
  ablate->add_option("--mode", a.mode, "patch50|patch70|size32|size64|patch_shuffle|pixel_shuffle")->required();
  jobs(ablate);

  std::string command = args.empty() ? "" : args.front();
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    emit_error(err, command, "config", e.what());
    return kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(a, out);
    if (prepare->parsed()) return cmd_prepare(a, out);
    if (transform->parsed()) return cmd_transform(a, out);
    if (split->parsed()) return cmd_split(a, out);
    if (trainc->parsed()) return cmd_train(a, out);
    if (evalc->parsed()) return cmd_eval(a, out);
    if (stats->parsed()) return cmd_stats(a, out);
    if (explain->parsed()) return cmd_explain(a, out);
    if (ablate->parsed()) return cmd_ablate(a, out);
  } catch (const Error& e) {
    emit_error(err, command, e.category(), e.what());
    return exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    emit_error(err, command, "data", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    emit_error(err, command, "data", e.what());
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace dsbias
