// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dsbias/rng.hpp"

namespace dsbias {

enum class Split { Unassigned, Train, Test };

std::string_view split_name(Split s);
Split parse_split(std::string_view s);

/// One image of the corpus. Paths are stored as written in the manifest,
/// i.e. relative to the manifest file's directory.
struct DatasetRecord {
  std::string dataset;
  std::string patient_id;
  Split split = Split::Unassigned;
  std::string image_path;
  std::string mask_dir;  // empty when the image has no masks

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

/// Registry of records plus the label set. Labels are kept sorted so that the
/// label index of a dataset does not depend on record order.
class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<DatasetRecord> records, std::filesystem::path base_dir = {});

  /// Reads `dataset,patient_id,split,image_path,mask_dir` CSV.
  static Manifest load(const std::filesystem::path& path);
  /// Parses CSV text; `base_dir` resolves relative paths.
  static Manifest parse(const std::string& csv, std::filesystem::path base_dir = {});
  void save(const std::filesystem::path& path) const;
  std::string to_csv() const;

  const std::vector<DatasetRecord>& records() const { return records_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }
  void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }

  std::size_t size() const { return records_.size(); }
  int label_of(const std::string& dataset) const;
  int label(std::size_t record) const { return label_of(records_[record].dataset); }

  std::filesystem::path image_path(std::size_t record) const;
  std::filesystem::path mask_dir(std::size_t record) const;
  /// Filename stem used to locate mask planes.
  std::string stem(std::size_t record) const;

  /// Records of one split, in manifest order (base directory retained).
  Manifest filter(Split s) const;
  /// Records of one dataset, in manifest order.
  Manifest filter_dataset(const std::string& dataset) const;

  /// Replaces the label registry (e.g. to keep the ordering of a parent manifest).
  void set_labels(std::vector<std::string> labels);

 private:
  std::vector<DatasetRecord> records_;
  std::vector<std::string> labels_;
  std::filesystem::path base_dir_;
};

/// Patient-level train/test split per dataset. round-half-up(ratio * patients)
/// patients go to train (clamped to [1, n-1]). Datasets whose records already
/// carry a split are validated instead of reassigned.
Manifest patient_split(const Manifest& manifest, double train_ratio, Rng& rng);

/// Keeps exactly n records per dataset, uniformly without replacement, in their
/// original relative order.
Manifest balanced_sample(const Manifest& manifest, std::size_t n_per_dataset, Rng& rng);

/// Concatenates manifests, then shuffles train, test and unassigned partitions
/// independently (output order: train, test, unassigned).
Manifest merge_shuffle(const std::vector<Manifest>& manifests, Rng& rng);

/// True when no (dataset, patient) has records on both sides.
bool is_patient_disjoint(const Manifest& manifest);

}  // namespace dsbias
