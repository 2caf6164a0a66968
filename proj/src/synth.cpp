// SPDX-License-Identifier: Apache-2.0
#include "dsbias/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "dsbias/error.hpp"
#include "dsbias/imaging.hpp"
#include "dsbias/parallel.hpp"

namespace dsbias {

namespace {

constexpr double kAirLevel = 24.0;
constexpr double kBodyLevel = 150.0;

struct Ellipse {
  int id;
  double cu, cv, ru, rv;  // centre and radii in unit image coordinates
  double delta;           // gray-level change where the organ is present
};

// Frontal-chest layout over the unit square (u = column, v = row). The image's
// left side holds the patient's right lung.
constexpr std::array<Ellipse, kNumPlanes> kAnatomy = {{
    {1, 0.66, 0.17, 0.14, 0.025, 40.0},   // left clavicle
    {2, 0.34, 0.17, 0.14, 0.025, 40.0},   // right clavicle
    {3, 0.87, 0.33, 0.06, 0.15, 20.0},    // left scapula
    {4, 0.13, 0.33, 0.06, 0.15, 20.0},    // right scapula
    {5, 0.68, 0.45, 0.15, 0.27, -70.0},   // left lung
    {6, 0.32, 0.45, 0.15, 0.27, -70.0},   // right lung
    {7, 0.60, 0.45, 0.04, 0.05, 20.0},    // left hilus
    {8, 0.40, 0.45, 0.04, 0.05, 20.0},    // right hilus
    {9, 0.56, 0.62, 0.14, 0.12, 35.0},    // heart
    {10, 0.53, 0.33, 0.04, 0.06, 25.0},   // aorta
    {11, 0.50, 0.80, 0.36, 0.07, 30.0},   // facies diaphragmatica
    {12, 0.50, 0.45, 0.06, 0.25, 30.0},   // mediastinum
    {13, 0.50, 0.20, 0.02, 0.10, -30.0},  // weasand
    {14, 0.50, 0.55, 0.035, 0.42, 30.0},  // spine
}};

constexpr Ellipse kBody = {0, 0.50, 0.56, 0.46, 0.56, 0.0};

bool inside(const Ellipse& e, double scale, double u, double v, double du, double dv, double aspect = 1.0) {
  const double x = (u - e.cu - du) / (e.ru * scale * aspect);
  const double y = (v - e.cv - dv) / (e.rv * scale / aspect);
  return x * x + y * y <= 1.0;
}

bool artifact_on(const SourceSpec& s, std::size_t r, std::size_t c) {
  const std::size_t half = s.artifact_period / 2;
  switch (s.artifact_pattern) {
    case ArtifactPattern::Solid: return true;
    case ArtifactPattern::HStripes: return (r / half) % 2 == 0;
    case ArtifactPattern::VStripes: return (c / half) % 2 == 0;
    case ArtifactPattern::Checker: return (r / half + c / half) % 2 == 0;
    case ArtifactPattern::Diagonal: return (r + c) % s.artifact_period < half;
  }
  return true;
}

SourceSpec source_from_config(const KeyValueDoc& doc, const std::string& name) {
  SourceSpec s;
  s.name = name;
  const std::string p = "source." + name + ".";
  s.intensity_offset = doc.get_double(p + "intensity_offset", s.intensity_offset);
  s.texture_freq = doc.get_double(p + "texture_freq", s.texture_freq);
  s.texture_amp = doc.get_double(p + "texture_amp", s.texture_amp);
  s.noise_sigma = doc.get_double(p + "noise_sigma", s.noise_sigma);
  s.organ_contrast = doc.get_double(p + "organ_contrast", s.organ_contrast);
  s.corner_artifact = doc.get_bool(p + "corner_artifact", s.corner_artifact);
  s.artifact_intensity = doc.get_double(p + "artifact_intensity", s.artifact_intensity);
  s.artifact_size = static_cast<std::size_t>(doc.get_int(p + "artifact_size", static_cast<long long>(s.artifact_size)));
  s.artifact_pattern = parse_artifact_pattern(doc.get_string(p + "artifact_pattern", "solid"));
  s.artifact_period =
      static_cast<std::size_t>(doc.get_int(p + "artifact_period", static_cast<long long>(s.artifact_period)));
  const double all = doc.get_double(p + "organ_scale", 1.0);
  for (int id = 0; id < kNumClasses; ++id)
    s.organ_scale[static_cast<std::size_t>(id)] = doc.get_double(p + "organ_scale." + std::to_string(id), all);
  const double aspect = doc.get_double(p + "organ_aspect", 1.0);
  for (int id = 0; id < kNumClasses; ++id)
    s.organ_aspect[static_cast<std::size_t>(id)] = doc.get_double(p + "organ_aspect." + std::to_string(id), aspect);
  return s;
}

}  // namespace

namespace {
constexpr std::array<std::pair<ArtifactPattern, const char*>, 5> kPatternNames{{
    {ArtifactPattern::Solid, "solid"},
    {ArtifactPattern::HStripes, "hstripes"},
    {ArtifactPattern::VStripes, "vstripes"},
    {ArtifactPattern::Checker, "checker"},
    {ArtifactPattern::Diagonal, "diagonal"},
}};
}  // namespace

std::string artifact_pattern_name(ArtifactPattern p) {
  for (const auto& [k, n] : kPatternNames)
    if (k == p) return n;
  return "solid";
}

ArtifactPattern parse_artifact_pattern(const std::string& name) {
  for (const auto& [k, n] : kPatternNames)
    if (name == n) return k;
  throw InvalidInput("synth: unknown artifact_pattern '" + name + "'");
}

SynthSpec SynthSpec::from_config(const KeyValueDoc& doc) {
  SynthSpec spec;
  spec.seed = static_cast<std::uint64_t>(doc.get_int("seed", 0));
  spec.image_size = static_cast<std::size_t>(doc.get_int("image_size", 512));
  spec.images_per_source = static_cast<std::size_t>(doc.get_int("images_per_source", 100));
  spec.patients_per_source = static_cast<std::size_t>(doc.get_int("patients_per_source", 40));
  spec.write_masks = doc.get_bool("write_masks", true);
  const std::string names = doc.require_string("sources");
  std::size_t start = 0;
  while (start <= names.size()) {
    auto end = names.find(',', start);
    if (end == std::string::npos) end = names.size();
    std::string n = names.substr(start, end - start);
    n.erase(0, n.find_first_not_of(" \t"));
    n.erase(n.find_last_not_of(" \t") + 1);
    if (!n.empty()) spec.sources.push_back(source_from_config(doc, n));
    start = end + 1;
  }
  spec.validate();
  return spec;
}

void SynthSpec::validate() const {
  if (sources.empty()) throw InvalidInput("synth: no sources");
  if (image_size < 8) throw InvalidInput("synth: image_size must be >= 8");
  if (patients_per_source < 1 || images_per_source < patients_per_source)
    throw InvalidInput("synth: need images_per_source >= patients_per_source >= 1");
  if (images_per_source > 4 * patients_per_source)
    throw InvalidInput("synth: each patient has at most 4 images; raise patients_per_source");
  for (const auto& s : sources) {
    if (s.name.empty() || s.name.find_first_of(",/\\ ") != std::string::npos)
      throw InvalidInput("synth: invalid source name '" + s.name + "'");
    for (double v : {s.intensity_offset, s.texture_freq, s.texture_amp, s.noise_sigma, s.organ_contrast,
                     s.artifact_intensity})
      if (!std::isfinite(v)) throw InvalidInput("synth: non-finite knob in source '" + s.name + "'");
    if (s.noise_sigma < 0) throw InvalidInput("synth: negative noise_sigma");
    for (double v : s.organ_scale)
      if (!(v > 0) || !std::isfinite(v)) throw InvalidInput("synth: organ_scale must be positive");
    for (double v : s.organ_aspect)
      if (!(v > 0) || !std::isfinite(v)) throw InvalidInput("synth: organ_aspect must be positive");
    if (s.artifact_size > image_size) throw InvalidInput("synth: artifact larger than image");
    if (s.artifact_period < 2 || s.artifact_period % 2 != 0)
      throw InvalidInput("synth: artifact_period must be even and >= 2");
  }
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = i + 1; j < sources.size(); ++j)
      if (sources[i].name == sources[j].name) throw InvalidInput("synth: duplicate source '" + sources[i].name + "'");
}

Phantom render_phantom(const SourceSpec& source, const PatientAnatomy& patient, std::size_t size, Rng& rng) {
  Phantom ph{GrayImage::u8(size, size), MaskSet(size, size)};
  const double n = static_cast<double>(size);
  const double two_pi = 2.0 * std::numbers::pi;
  const double tex_dir_u = std::cos(std::numbers::pi / 6.0), tex_dir_v = std::sin(std::numbers::pi / 6.0);
  for (std::size_t r = 0; r < size; ++r) {
    const double v = (static_cast<double>(r) + 0.5) / n;
    for (std::size_t c = 0; c < size; ++c) {
      const double u = (static_cast<double>(c) + 0.5) / n;
      double value = kAirLevel;
      if (inside(kBody, 1.0, u, v, 0.0, 0.0)) {
        value = kBodyLevel + source.intensity_offset +
                source.texture_amp * std::sin(two_pi * source.texture_freq * (u * tex_dir_u + v * tex_dir_v));
        for (const auto& e : kAnatomy) {
          const double scale = patient.scale * source.organ_scale[static_cast<std::size_t>(e.id)];
          const double aspect = source.organ_aspect[static_cast<std::size_t>(e.id)];
          if (inside(e, scale, u, v, patient.shift_u, patient.shift_v, aspect)) {
            ph.masks.plane(e.id).at(r, c) = 1;
            value += source.organ_contrast * e.delta;
          }
        }
      }
      if (source.noise_sigma > 0) value += rng.normal(0.0, source.noise_sigma);
      if (source.corner_artifact && r < source.artifact_size && c < source.artifact_size &&
          artifact_on(source, r, c))
        value += source.artifact_intensity;
      ph.image.at(r, c) = static_cast<float>(std::clamp(std::round(value), 0.0, 255.0));
    }
  }
  return ph;
}

Manifest synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir, int jobs) {
  spec.validate();
  struct Job {
    std::size_t source, patient, index;
    PatientAnatomy anatomy;
    DatasetRecord record;
  };
  std::vector<Job> work;
  for (std::size_t s = 0; s < spec.sources.size(); ++s) {
    const SourceSpec& src = spec.sources[s];
    // Images per patient: one each, the remainder spread randomly with a cap of four.
    Rng alloc = Rng::derive(spec.seed, {s, 0});
    std::vector<std::size_t> counts(spec.patients_per_source, 1);
    for (std::size_t extra = spec.images_per_source - spec.patients_per_source; extra > 0;) {
      const auto p = static_cast<std::size_t>(alloc.uniform_int(0, static_cast<std::int64_t>(counts.size()) - 1));
      if (counts[p] < 4) {
        ++counts[p];
        --extra;
      }
    }
    std::size_t index = 0;
    for (std::size_t p = 0; p < counts.size(); ++p) {
      Rng prng = Rng::derive(spec.seed, {s, 1, p});
      PatientAnatomy anatomy{prng.uniform(0.95, 1.05), prng.uniform(-0.02, 0.02), prng.uniform(-0.02, 0.02)};
      char pid[32];
      std::snprintf(pid, sizeof pid, "p%05zu", p);
      const std::string patient = src.name + "_" + pid;
      for (std::size_t k = 0; k < counts[p]; ++k, ++index) {
        const std::string stem = patient + "_" + std::to_string(k);
        DatasetRecord rec{src.name, patient, Split::Unassigned, "images/" + src.name + "/" + stem + ".pgm",
                          spec.write_masks ? "masks/" + src.name : ""};
        work.push_back({s, p, index, anatomy, rec});
      }
    }
  }

  parallel_for(work.size(), jobs, [&](std::size_t i) {
    const Job& job = work[i];
    Rng rng = Rng::derive(spec.seed, {job.source, 2, job.index});
    PatientAnatomy anatomy = job.anatomy;
    anatomy.shift_u += rng.uniform(-0.005, 0.005);
    anatomy.shift_v += rng.uniform(-0.005, 0.005);
    const Phantom ph = render_phantom(spec.sources[job.source], anatomy, spec.image_size, rng);
    write_pgm(ph.image, out_dir / job.record.image_path);
    if (spec.write_masks)
      write_mask_set(ph.masks, out_dir / job.record.mask_dir,
                     std::filesystem::path(job.record.image_path).stem().string());
  });

  std::vector<DatasetRecord> records;
  records.reserve(work.size());
  for (auto& j : work) records.push_back(std::move(j.record));
  Manifest manifest(std::move(records), out_dir);
  manifest.save(out_dir / "manifest.csv");
  return manifest;
}

}  // namespace dsbias
