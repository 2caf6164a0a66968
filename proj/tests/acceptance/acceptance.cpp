// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "dsbias/augment.hpp"
#include "dsbias/checkpoint.hpp"
#include "dsbias/explain.hpp"
#include "dsbias/imaging.hpp"
#include "dsbias/masks.hpp"
#include "dsbias/metrics.hpp"
#include "dsbias/network.hpp"
#include "dsbias/optim.hpp"
#include "dsbias/stats.hpp"
#include "dsbias/synth.hpp"
#include "dsbias/train.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dsbias;
namespace fs = std::filesystem;
using dsbias::testing::brute_bbox;
using dsbias::testing::brute_boundary;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects named sub-checks of one criterion.
struct Checks {
  std::vector<std::string> failed;
  std::string detail;
  void expect(bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "dsbias_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

SourceSpec source(const std::string& name) {
  SourceSpec s;
  s.name = name;
  return s;
}

Manifest make_split_corpus(const std::string& name, std::vector<SourceSpec> sources, std::size_t images,
                           bool masks, std::uint64_t seed) {
  SynthSpec spec;
  spec.sources = std::move(sources);
  spec.images_per_source = images;
  spec.patients_per_source = images / 2;
  spec.image_size = 128;
  spec.write_masks = masks;
  spec.seed = seed;
  const Manifest m = synth_generate(spec, work_dir() / name);
  Rng rng = Rng::derive(seed, {2});
  return patient_split(m, 0.8, rng);
}

TrainOptions bias_options(TaskKind task, std::size_t input, std::size_t epochs, std::uint64_t seed) {
  TrainOptions o;
  o.prep.task = task;
  o.prep.input_size = input;
  o.prep.seed = seed;
  o.model.arch = "plain";
  o.model.input_size = input;
  o.model.n_classes = 4;
  o.model.seed = seed;
  o.train.lr = 1e-3;
  o.train.batch_size = 32;
  o.train.epochs = epochs;
  o.train.seed = seed;
  o.eval_each_epoch = false;
  return o;
}

double final_test_f1(const TrainResult& r) {
  for (auto it = r.history.rbegin(); it != r.history.rend(); ++it)
    if (it->split == "test") return it->metrics.macro_f1;
  return 0.0;
}

// Four sources that differ only in intensity offset and texture amplitude.
std::vector<SourceSpec> intensity_sources(double step = 10) {
  const double offsets[4] = {-3 * step, -step, step, 3 * step};
  const double texture[4] = {0, 6, 0, 6};
  std::vector<SourceSpec> out;
  for (int i = 0; i < 4; ++i) {
    SourceSpec s = source("src" + std::to_string(i));
    s.intensity_offset = offsets[i];
    s.texture_amp = texture[i];
    out.push_back(s);
  }
  return out;
}

std::vector<SourceSpec> identical_sources() {
  std::vector<SourceSpec> out;
  for (int i = 0; i < 4; ++i) out.push_back(source("src" + std::to_string(i)));
  return out;
}

// Four sources with matched intensities whose lungs differ in shape only.
std::vector<SourceSpec> shape_sources() {
  const double aspect[4] = {0.72, 0.85, 1.0, 1.18};
  std::vector<SourceSpec> out;
  for (int i = 0; i < 4; ++i) {
    SourceSpec s = source("src" + std::to_string(i));
    for (int id : kLungIds) s.organ_aspect[static_cast<std::size_t>(id)] = aspect[i];
    out.push_back(s);
  }
  return out;
}

// Four sources identical except for the fill pattern of a corner marker of
// equal size and mean intensity.
std::vector<SourceSpec> artifact_sources() {
  const ArtifactPattern pattern[4] = {ArtifactPattern::HStripes, ArtifactPattern::VStripes, ArtifactPattern::Checker,
                                      ArtifactPattern::Diagonal};
  std::vector<SourceSpec> out;
  for (int i = 0; i < 4; ++i) {
    SourceSpec s = source("src" + std::to_string(i));
    s.corner_artifact = true;
    s.artifact_size = 16;
    s.artifact_intensity = 150;
    s.artifact_pattern = pattern[i];
    s.artifact_period = 8;
    out.push_back(s);
  }
  return out;
}

const Manifest& intensity_corpus() {
  static const Manifest m = make_split_corpus("intensity", intensity_sources(), 200, true, 101);
  return m;
}

std::map<int, double> intensity_f1_cache;

double intensity_f1(std::size_t input) {
  auto it = intensity_f1_cache.find(static_cast<int>(input));
  if (it != intensity_f1_cache.end()) return it->second;
  const double f1 = final_test_f1(train(intensity_corpus(), bias_options(TaskKind::Cropped, input, 20, 7)));
  intensity_f1_cache[static_cast<int>(input)] = f1;
  return f1;
}

// ------------------------------------------------------------------ criteria

void criterion1(Checks& k) {
  {
    Tensor<double> u({3, 4}, 0.7);
    const double loss = cross_entropy(u, std::vector<int>{0, 1, 3}).loss;
    k.expect(std::abs(loss - std::log(4.0)) < 1e-9, "uniform-logit cross-entropy");
  }
  {
    TrainConfig cfg;
    std::vector<double> p{1.0}, g{1.0}, m{0.0}, v{0.0};
    adamw_update<double>(p, g, m, v, 1, 0.1, cfg);
    double pm = 0, pv = 0, pp = 1.0;
    pm = cfg.beta1 * pm + (1 - cfg.beta1) * 1.0;
    pv = cfg.beta2 * pv + (1 - cfg.beta2) * 1.0;
    const double mh = pm / (1 - cfg.beta1), vh = pv / (1 - cfg.beta2);
    pp = pp - 0.1 * mh / (std::sqrt(vh) + cfg.eps) - 0.1 * cfg.weight_decay * pp;
    k.expect(std::abs(p[0] - pp) < 1e-12, "AdamW scalar step");
  }
  {
    TrainConfig c;
    c.lr = 3e-4;
    k.expect(lr_schedule(0, 1000, c) == 3e-4 && lr_schedule(1000, 1000, c) == 0.0, "cosine endpoints");
  }
  {
    const auto sg = savgol_coefficients(5, 2);
    const double ref[5] = {-3, 12, 17, 12, -3};
    bool ok = true;
    for (int i = 0; i < 5; ++i) ok = ok && std::abs(sg[static_cast<std::size_t>(i)] - ref[i] / 35.0) < 1e-9;
    k.expect(ok, "Savitzky-Golay (5,2) coefficients");
  }
  {
    Rng rng(1001);
    bool ok = true;
    for (int t = 0; t < 500; ++t) {
      const int nk = static_cast<int>(rng.uniform_int(2, 6));
      const auto n = static_cast<std::size_t>(rng.uniform_int(1, 200));
      std::vector<int> p(n), l(n);
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = static_cast<int>(rng.uniform_int(0, nk - 1));
        l[i] = static_cast<int>(rng.uniform_int(0, nk - 1));
      }
      const Metrics m = f1_scores(p, l, static_cast<std::size_t>(nk));
      const auto ref = dsbias::testing::brute_f1(p, l, nk);
      ok = ok && m.f1 == ref;
      ok = ok && std::abs(m.macro_f1 - std::accumulate(ref.begin(), ref.end(), 0.0) / nk) < 1e-15;
    }
    k.expect(ok, "F1 brute force on 500 vectors");
  }
  {
    Rng rng(1002);
    bool ok = true;
    for (int t = 0; t < 1000; ++t) {
      BinaryMask m = dsbias::testing::random_mask(16, 16, rng, rng.uniform(0.005, 0.6));
      if (m.popcount() == 0) m.at(7, 9) = 1;
      const BBox b = bbox_nonzero(m);
      ok = ok && b == brute_bbox(m);
      const GrayImage img = dsbias::testing::random_u8(16, 16, rng);
      const GrayImage c = crop(img, b);
      ok = ok && c.width() == b.col_max - b.col_min + 1 && c.height() == b.row_max - b.row_min + 1;
      for (std::size_t r = 0; ok && r < c.height(); ++r)
        for (std::size_t cc = 0; cc < c.width(); ++cc) ok = ok && c.at(r, cc) == img.at(b.row_min + r, b.col_min + cc);
      MaskSet ms(16, 16);
      ms.plane(static_cast<int>(rng.uniform_int(1, kNumPlanes))) = m;
      const GrayImage contour = trace_contours(ms);
      std::set<std::pair<std::size_t, std::size_t>> got;
      for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t cc = 0; cc < 16; ++cc)
          if (contour.at(r, cc) != 0.0f) got.insert({r, cc});
      ok = ok && got == brute_boundary(m);
    }
    k.expect(ok, "bbox/crop/contour exhaustive oracles on 1000 masks");
  }
}

template <typename T>
double grad_check(Network<T>& net, Network<double>& ref, const Tensor<T>& x, const Tensor<double>& xd,
                  const std::vector<int>& y, double floor) {
  net.zero_grad();
  net.backward(cross_entropy(net.forward(x), y).grad);
  auto ps = net.params();
  auto rs = ref.params();
  const double h = 1e-6;
  double worst = 0;
  for (std::size_t k = 0; k < ps.size(); ++k)
    for (std::size_t i = 0; i < rs[k]->value.numel(); ++i) {
      const double o = rs[k]->value[i];
      rs[k]->value[i] = o + h;
      const double up = cross_entropy(ref.forward(xd), y).loss;
      rs[k]->value[i] = o - h;
      const double dn = cross_entropy(ref.forward(xd), y).loss;
      rs[k]->value[i] = o;
      const double num = (up - dn) / (2 * h), ana = static_cast<double>(ps[k]->grad[i]);
      worst = std::max(worst, std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), floor}));
    }
  return worst;
}

void criterion2(Checks& k) {
  ModelConfig cfg;
  cfg.input_size = 8;
  cfg.channels = {3, 4};
  cfg.hidden = 6;
  cfg.n_classes = 3;
  cfg.seed = 2024;
  Network<float> fnet = build_network<float>(cfg);
  Network<double> dnet = build_network<double>(cfg);
  auto fp = fnet.params();
  auto dp = dnet.params();
  for (std::size_t i = 0; i < fp.size(); ++i)
    for (std::size_t j = 0; j < fp[i]->value.numel(); ++j) dp[i]->value[j] = fp[i]->value[j];
  Rng rng(2002);
  Tensor<float> xf({4, 1, 8, 8});
  Tensor<double> xd({4, 1, 8, 8});
  for (std::size_t i = 0; i < xf.numel(); ++i) xd[i] = xf[i] = static_cast<float>(rng.uniform(-1, 1));
  const std::vector<int> y{0, 1, 2, 1};
  Network<double> ref = dnet;
  const double ed = grad_check(dnet, ref, xd, xd, y, 1e-6);
  const double ef = grad_check(fnet, ref, xf, xd, y, 1e-4);
  k.note("max rel err double " + fmt("%.2e", ed) + ", float " + fmt("%.2e", ef));
  k.expect(ed < 1e-6, "double precision gradient");
  k.expect(ef < 1e-3, "single precision gradient");
}

void criterion3(Checks& k) {
  Rng rng(3003);
  bool hist_ok = true, mean_ok = true;
  for (int t = 0; t < 100; ++t) {
    const GrayImage img = dsbias::testing::random_u8(64, 64, rng);
    const Histogram h = histogram(img, 256);
    hist_ok = hist_ok && histogram(pixel_shuffle(img, rng), 256) == h;
    hist_ok = hist_ok && histogram(patch_shuffle(img, 8, rng), 256) == h;
    const GrayImage f = dsbias::testing::random_f32(32, 32, rng, 0, 1);
    const GrayImage s = apply_augmentation(AugmentSpec::make(AugmentKind::ScaleIntensityFixedMean, 1.0), f, rng);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      ma += f.pixels()[i];
      mb += s.pixels()[i];
    }
    mean_ok = mean_ok && std::abs(ma - mb) / static_cast<double>(f.size()) < 1e-5;
  }
  k.expect(hist_ok, "shuffles preserve histograms bit-exactly");
  k.expect(mean_ok, "ScaleIntensityFixedMean preserves the mean");

  bool disjoint = true;
  for (int t = 0; t < 100; ++t) {
    std::vector<DatasetRecord> recs;
    const int nd = static_cast<int>(rng.uniform_int(1, 4));
    for (int d = 0; d < nd; ++d) {
      const int np = static_cast<int>(rng.uniform_int(2, 30));
      for (int p = 0; p < np; ++p)
        for (int i = 0, ni = static_cast<int>(rng.uniform_int(1, 4)); i < ni; ++i)
          recs.push_back({"d" + std::to_string(d), "p" + std::to_string(p), Split::Unassigned,
                          std::to_string(d) + "_" + std::to_string(p) + "_" + std::to_string(i) + ".pgm", ""});
    }
    disjoint = disjoint && is_patient_disjoint(patient_split(Manifest(recs), rng.uniform(0.2, 0.9), rng));
  }
  k.expect(disjoint, "patient-disjoint on 100 split trials");

  auto run = [&](const std::string& tag) {
    SynthSpec spec;
    spec.sources = intensity_sources();
    spec.images_per_source = 24;
    spec.patients_per_source = 12;
    spec.image_size = 64;
    spec.seed = 33;
    const Manifest m = synth_generate(spec, work_dir() / ("repro_" + tag));
    Rng r = Rng::derive(33, {2});
    Manifest s = patient_split(m, 0.8, r);
    std::string images;
    for (std::size_t i = 0; i < s.size(); ++i) images += dsbias::testing::slurp(s.image_path(i));
    TrainOptions o = bias_options(TaskKind::Cropped, 32, 2, 5);
    o.eval_each_epoch = true;
    TrainResult tr = train(s, o);
    ModelBundle b{o.model, o.prep, tr.labels, std::move(tr.net), std::move(tr.opt)};
    return std::vector<std::string>{s.to_csv(), images, encode_checkpoint(b), metrics_csv(tr.history, 4)};
  };
  const auto a = run("a"), b = run("b");
  k.expect(a[0] == b[0] && a[1] == b[1], "identical seeds give identical manifests and images");
  k.expect(a[2] == b[2], "identical seeds give identical checkpoints");
  k.expect(a[3] == b[3], "identical seeds give identical metrics");
}

void criterion4(Checks& k) {
  const double f1 = intensity_f1(64);
  const Manifest control = make_split_corpus("control", identical_sources(), 200, true, 102);
  const double cf1 = final_test_f1(train(control, bias_options(TaskKind::Cropped, 64, 20, 7)));
  k.note("biased F1 " + fmt("%.3f", f1) + ", control F1 " + fmt("%.3f", cf1));
  k.expect(f1 >= 0.90, "biased corpus macro-F1 >= 0.90");
  k.expect(std::abs(cf1 - 0.25) <= 0.10, "control macro-F1 within 0.25 +- 0.10");
}

void criterion5(Checks& k) {
  auto opts = [](ShuffleMode mode) {
    // Histogram cues after shuffling are learned slowly without normalization
    // layers, hence the longer schedule.
    TrainOptions o = bias_options(TaskKind::Raw, 64, 40, 11);
    o.model.arch = "residual";
    o.train.lr = 2e-3;
    o.prep.shuffle = mode;
    return o;
  };
  const Manifest inten = make_split_corpus("shuffle_intensity", intensity_sources(20), 200, false, 103);
  const double f_int_px = final_test_f1(train(inten, opts(ShuffleMode::Pixel)));
  const Manifest shape = make_split_corpus("shuffle_shape", shape_sources(), 200, false, 104);
  const double f_shape = final_test_f1(train(shape, opts(ShuffleMode::None)));
  const double f_shape_px = final_test_f1(train(shape, opts(ShuffleMode::Pixel)));
  k.note("intensity+pixel " + fmt("%.3f", f_int_px) + ", shape " + fmt("%.3f", f_shape) + ", shape+pixel " +
         fmt("%.3f", f_shape_px));
  k.expect(f_int_px >= 0.85, "intensity bias survives pixel shuffling (F1 >= 0.85)");
  k.expect(f_shape >= 0.85, "shape bias learnable unshuffled (F1 >= 0.85)");
  k.expect(std::abs(f_shape_px - 0.25) <= 0.12, "shape bias destroyed by pixel shuffling (F1 0.25 +- 0.12)");
}

void criterion6(Checks& k) {
  const double f64 = intensity_f1(64), f32 = intensity_f1(32);
  k.note("F1 at 64 " + fmt("%.3f", f64) + ", at 32 " + fmt("%.3f", f32));
  k.expect(std::abs(f64 - f32) <= 0.08, "F1 at 32 within 0.08 of F1 at 64");
}

void criterion7(Checks& k) {
  const Manifest m = make_split_corpus("artifact", artifact_sources(), 200, false, 105);
  // Grad-CAM is read off the last convolutional tap, so use the GAP network.
  TrainOptions o = bias_options(TaskKind::Raw, 64, 20, 13);
  o.model.arch = "residual";
  TrainResult r = train(m, o);
  const double f1 = final_test_f1(r);

  const Manifest test = m.filter(Split::Test);
  const auto bases = load_base_images(test, o.prep, 1);
  const std::size_t region = 16 * o.prep.input_size / 128;
  std::size_t hits = 0;
  std::vector<std::size_t> per_class_n(4, 0), per_class_hits(4, 0);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const GrayImage x = finalize_input(bases[i], o.prep, false, 0, i, nullptr);
    const Heatmap h = gradcam(r.net, x, test.label(i));
    double in = 0, out = 0;
    for (std::size_t rr = 0; rr < h.height; ++rr)
      for (std::size_t c = 0; c < h.width; ++c) (rr < region && c < region ? in : out) += h.at(rr, c);
    in /= static_cast<double>(region * region);
    out /= static_cast<double>(h.values.size() - region * region);
    const auto lbl = static_cast<std::size_t>(test.label(i));
    ++per_class_n[lbl];
    if (!h.degenerate && in >= 2.0 * out) {
      ++hits;
      ++per_class_hits[lbl];
    }
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(test.size());
  std::string per_class;
  for (std::size_t c = 0; c < 4; ++c)
    per_class += (c ? " " : "") + std::to_string(per_class_hits[c]) + "/" + std::to_string(per_class_n[c]);

  TrainOptions p = o;
  p.prep.patch_size = default_black_patch(o.prep.input_size);
  const double f1_patched = final_test_f1(train(m, p));
  k.note("artifact F1 " + fmt("%.3f", f1) + ", localized " + fmt("%.0f%%", 100 * frac) + " (per class " + per_class + "), patched F1 " +
         fmt("%.3f", f1_patched));
  k.expect(frac >= 0.80, "heatmap inside/outside >= 2 on >= 80% of test images");
  k.expect(std::abs(f1_patched - 0.25) <= 0.12, "black patches remove the artifact signal (F1 0.25 +- 0.12)");
}

void criterion8(Checks& k) {
  SynthSpec spec;
  const double scales[5] = {0.8, 0.9, 1.0, 1.1, 1.2};
  for (int i = 0; i < 5; ++i) {
    SourceSpec s = source("s" + std::to_string(i));
    for (int id : kLungIds) s.organ_scale[static_cast<std::size_t>(id)] = scales[i];
    spec.sources.push_back(s);
  }
  spec.images_per_source = 10;
  spec.patients_per_source = 5;
  spec.image_size = 96;
  spec.seed = 8;
  const Manifest m = synth_generate(spec, work_dir() / "stats");
  const ClassStatsReport rep = dataset_class_stats(m);
  k.expect(rep.images == 50 && rep.skipped == 0, "all 50 images measured");

  double worst = 0;
  std::vector<double> lung_means;
  for (const auto& row : rep.rows) {
    std::vector<double> pct;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m.records()[i].dataset != row.dataset) continue;
      const MaskSet ms = read_mask_set(m.mask_dir(i), m.stem(i), 96, 96);
      std::size_t n = 0;
      if (row.class_id == 0) {
        for (std::size_t p = 0; p < 96 * 96; ++p) {
          bool any = false;
          for (int id = 1; id <= kNumPlanes; ++id) any = any || ms.plane(id).bits[p];
          n += !any;
        }
      } else {
        for (auto b : ms.plane(row.class_id).bits) n += b;
      }
      pct.push_back(100.0 * static_cast<double>(n) / (96.0 * 96.0));
    }
    const double mean = std::accumulate(pct.begin(), pct.end(), 0.0) / static_cast<double>(pct.size());
    double var = 0;
    for (double v : pct) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(pct.size()));
    const double med = dsbias::testing::hf7_quantile(pct, 0.5);
    const double iqr = dsbias::testing::hf7_quantile(pct, 0.75) - dsbias::testing::hf7_quantile(pct, 0.25);
    worst = std::max({worst, std::abs(mean - row.percent.mean), std::abs(sd - row.percent.std),
                      std::abs(med - row.percent.median), std::abs(iqr - row.percent.iqr())});
    if (row.class_id == 5) lung_means.push_back(row.percent.mean);
  }
  k.note("max oracle deviation " + fmt("%.1e", worst));
  k.expect(worst < 1e-9, "statistics match the sort-based oracle");
  k.expect(lung_means.size() == 5 && std::is_sorted(lung_means.begin(), lung_means.end()) &&
               std::adjacent_find(lung_means.begin(), lung_means.end()) == lung_means.end(),
           "lung fraction ordering follows organ_scale");
}

struct Criterion {
  int id;
  const char* title;
  double limit_s;
  std::function<void(Checks&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "numeric oracles", 60, criterion1},
      {2, "gradient check", 30, criterion2},
      {3, "invariances and reproducibility", 120, criterion3},
      {4, "synthetic bias recovery", 600, criterion4},
      {5, "shuffle ablation ordering", 1200, criterion5},
      {6, "resolution ablation", 900, criterion6},
      {7, "Grad-CAM artifact localization", 1200, criterion7},
      {8, "stats pipeline", 60, criterion8},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    Checks k;
    const auto t0 = Clock::now();
    try {
      c.run(k);
    } catch (const std::exception& e) {
      k.failed.push_back(std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t0);
    if (secs > c.limit_s) k.failed.push_back("time limit " + fmt("%.0f s", c.limit_s));
    const bool ok = k.failed.empty();
    failures += !ok;
    std::printf("%s criterion %d: %s [%.1f s]%s%s\n", ok ? "PASS" : "FAIL", c.id, c.title, secs,
                k.detail.empty() ? "" : " ", k.detail.c_str());
    for (const auto& f : k.failed) std::printf("    failed: %s\n", f.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
