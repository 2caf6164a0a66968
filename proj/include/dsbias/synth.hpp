// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsbias/config.hpp"
#include "dsbias/data.hpp"
#include "dsbias/image.hpp"
#include "dsbias/masks.hpp"
#include "dsbias/rng.hpp"

namespace dsbias {

/// Fill of the corner marker. Striped, checker and diagonal patterns are on for
/// exactly half of each period, so they share the same mean at equal intensity.
enum class ArtifactPattern { Solid, HStripes, VStripes, Checker, Diagonal };

std::string artifact_pattern_name(ArtifactPattern p);
/// Throws InvalidInput on an unknown name.
ArtifactPattern parse_artifact_pattern(const std::string& name);

/// Bias knobs of one synthetic source. All intensities are in 8-bit gray levels.
struct SourceSpec {
  std::string name;
  double intensity_offset = 0.0;    // added to every body pixel
  double texture_freq = 8.0;        // sinusoid cycles across the image
  double texture_amp = 0.0;         // sinusoid amplitude inside the body
  double noise_sigma = 6.0;         // i.i.d. Gaussian pixel noise
  double organ_contrast = 1.0;      // multiplier on every organ's gray delta
  bool corner_artifact = false;     // burned-in marker in the top-left corner
  double artifact_intensity = 120.0;
  std::size_t artifact_size = 20;   // marker side in pixels
  ArtifactPattern artifact_pattern = ArtifactPattern::Solid;
  std::size_t artifact_period = 8;  // pixels per pattern cycle
  std::array<double, kNumClasses> organ_scale{};  // per class id, 1.0 = nominal
  // Per class id: horizontal radius times a, vertical radius divided by a.
  // Changes shape but not area, so the intensity histogram stays put.
  std::array<double, kNumClasses> organ_aspect{};

  SourceSpec() {
    organ_scale.fill(1.0);
    organ_aspect.fill(1.0);
  }
};

struct SynthSpec {
  std::vector<SourceSpec> sources;
  std::size_t images_per_source = 100;
  std::size_t patients_per_source = 40;
  std::size_t image_size = 512;
  bool write_masks = true;
  std::uint64_t seed = 0;

  /// Reads `seed`, `image_size`, `images_per_source`, `patients_per_source`,
  /// `write_masks`, `sources = a,b,...` and `source.<name>.<knob>` keys.
  static SynthSpec from_config(const KeyValueDoc& doc);
  void validate() const;
};

/// Per-patient anatomical variation shared by all images of that patient.
struct PatientAnatomy {
  double scale = 1.0;
  double shift_u = 0.0;
  double shift_v = 0.0;
};

struct Phantom {
  GrayImage image;
  MaskSet masks;
};

/// Renders one phantom: elliptical anatomy over a body silhouette on air.
Phantom render_phantom(const SourceSpec& source, const PatientAnatomy& patient, std::size_t size, Rng& rng);

/// Writes images/, masks/ and manifest.csv under `out_dir` and returns the
/// manifest. Deterministic in spec.seed regardless of `jobs`.
Manifest synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir, int jobs = 1);

}  // namespace dsbias
