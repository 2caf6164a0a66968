// SPDX-License-Identifier: Apache-2.0
#include "dsbias/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dsbias/error.hpp"

namespace dsbias {

namespace {

constexpr std::string_view kHeader = "dataset,patient_id,split,image_path,mask_dir";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

void check_field(const std::string& field) {
  if (field.find_first_of(",\n\r\"") != std::string::npos)
    throw DataError("manifest field '" + field + "' contains a comma, quote or newline");
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Test:
      return "test";
    case Split::Unassigned:
      break;
  }
  return "unassigned";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  if (s.empty() || s == "unassigned") return Split::Unassigned;
  throw DataError("unknown split '" + std::string(s) + "'");
}

Manifest::Manifest(std::vector<DatasetRecord> records, std::filesystem::path base_dir)
    : records_(std::move(records)), base_dir_(std::move(base_dir)) {
  for (const auto& r : records_)
    if (std::find(labels_.begin(), labels_.end(), r.dataset) == labels_.end()) labels_.push_back(r.dataset);
  std::sort(labels_.begin(), labels_.end());
}

Manifest Manifest::parse(const std::string& csv, std::filesystem::path base_dir) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kHeader) throw DataError("manifest header must be '" + std::string(kHeader) + "'");
  std::vector<DatasetRecord> records;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 5) throw DataError("manifest line " + std::to_string(lineno) + ": expected 5 fields");
    if (f[0].empty() || f[3].empty())
      throw DataError("manifest line " + std::to_string(lineno) + ": dataset and image_path are required");
    records.push_back({f[0], f[1], parse_split(f[2]), f[3], f[4]});
  }
  return Manifest(std::move(records), std::move(base_dir));
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path());
}

std::string Manifest::to_csv() const {
  std::string out(kHeader);
  out += '\n';
  for (const auto& r : records_) {
    for (const auto* f : {&r.dataset, &r.patient_id, &r.image_path, &r.mask_dir}) check_field(*f);
    out += r.dataset + ',' + r.patient_id + ',' + std::string(split_name(r.split)) + ',' + r.image_path + ',' +
           r.mask_dir + '\n';
  }
  return out;
}

void Manifest::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  out << to_csv();
}

int Manifest::label_of(const std::string& dataset) const {
  auto it = std::find(labels_.begin(), labels_.end(), dataset);
  if (it == labels_.end()) throw DataError("dataset '" + dataset + "' not in label registry");
  return static_cast<int>(it - labels_.begin());
}

std::filesystem::path Manifest::image_path(std::size_t record) const {
  return base_dir_ / records_.at(record).image_path;
}

std::filesystem::path Manifest::mask_dir(std::size_t record) const {
  const auto& m = records_.at(record).mask_dir;
  if (m.empty()) return {};
  return base_dir_ / m;
}

std::string Manifest::stem(std::size_t record) const {
  return std::filesystem::path(records_.at(record).image_path).stem().string();
}

Manifest Manifest::filter(Split s) const {
  std::vector<DatasetRecord> out;
  for (const auto& r : records_)
    if (r.split == s) out.push_back(r);
  Manifest m(std::move(out), base_dir_);
  m.labels_ = labels_;
  return m;
}

Manifest Manifest::filter_dataset(const std::string& dataset) const {
  std::vector<DatasetRecord> out;
  for (const auto& r : records_)
    if (r.dataset == dataset) out.push_back(r);
  return Manifest(std::move(out), base_dir_);
}

void Manifest::set_labels(std::vector<std::string> labels) {
  for (const auto& r : records_)
    if (std::find(labels.begin(), labels.end(), r.dataset) == labels.end())
      throw InvalidInput("set_labels: registry lacks dataset '" + r.dataset + "'");
  labels_ = std::move(labels);
}

bool is_patient_disjoint(const Manifest& manifest) {
  std::set<std::pair<std::string, std::string>> train, test;
  for (const auto& r : manifest.records()) {
    if (r.split == Split::Train) train.insert({r.dataset, r.patient_id});
    if (r.split == Split::Test) test.insert({r.dataset, r.patient_id});
  }
  return std::none_of(train.begin(), train.end(), [&](const auto& p) { return test.contains(p); });
}

Manifest patient_split(const Manifest& manifest, double train_ratio, Rng& rng) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw InvalidInput("patient_split: ratio must be in (0,1)");
  std::vector<DatasetRecord> records = manifest.records();

  for (const auto& dataset : manifest.labels()) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].dataset == dataset) idx.push_back(i);
    const bool any_assigned = std::any_of(idx.begin(), idx.end(),
                                          [&](std::size_t i) { return records[i].split != Split::Unassigned; });
    if (any_assigned) {
      // Pre-provided split: every record must carry one and patients must not leak.
      for (std::size_t i : idx)
        if (records[i].split == Split::Unassigned)
          throw SplitError("dataset '" + dataset + "' mixes assigned and unassigned records");
      if (!is_patient_disjoint(Manifest({records.begin(), records.end()})))
        throw SplitError("dataset '" + dataset + "' has a provided split that leaks patients");
      continue;
    }

    std::set<std::string> uniq;
    for (std::size_t i : idx) uniq.insert(records[i].patient_id);
    const std::vector<std::string> patients(uniq.begin(), uniq.end());
    const std::size_t n = patients.size();
    if (n < 2) throw SplitError("dataset '" + dataset + "' has fewer than 2 patients; cannot split");
    auto n_train = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n) + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    const auto perm = rng.permutation(n);
    std::set<std::string> train;
    for (std::size_t k = 0; k < n_train; ++k) train.insert(patients[perm[k]]);
    for (std::size_t i : idx) records[i].split = train.contains(records[i].patient_id) ? Split::Train : Split::Test;
  }
  Manifest out(std::move(records), manifest.base_dir());
  out.set_labels(manifest.labels());
  return out;
}

Manifest balanced_sample(const Manifest& manifest, std::size_t n_per_dataset, Rng& rng) {
  std::vector<bool> keep(manifest.size(), false);
  for (const auto& dataset : manifest.labels()) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < manifest.size(); ++i)
      if (manifest.records()[i].dataset == dataset) idx.push_back(i);
    if (idx.size() < n_per_dataset) throw ShortageError(dataset, idx.size(), n_per_dataset);
    const auto perm = rng.permutation(idx.size());
    for (std::size_t k = 0; k < n_per_dataset; ++k) keep[idx[perm[k]]] = true;
  }
  std::vector<DatasetRecord> out;
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (keep[i]) out.push_back(manifest.records()[i]);
  Manifest m(std::move(out), manifest.base_dir());
  m.set_labels(manifest.labels());
  return m;
}

Manifest merge_shuffle(const std::vector<Manifest>& manifests, Rng& rng) {
  std::vector<std::string> labels;
  std::vector<DatasetRecord> all;
  std::filesystem::path base = manifests.empty() ? std::filesystem::path{} : manifests.front().base_dir();
  for (const auto& m : manifests) {
    if (m.base_dir() != base) throw InvalidInput("merge_shuffle: manifests resolve paths from different directories");
    const bool identical = m.labels() == labels;
    const bool disjoint = std::none_of(m.labels().begin(), m.labels().end(), [&](const std::string& l) {
      return std::find(labels.begin(), labels.end(), l) != labels.end();
    });
    if (!labels.empty() && !identical && !disjoint)
      throw InvalidInput("merge_shuffle: label registries overlap without being identical");
    if (!identical)
      for (const auto& l : m.labels()) labels.push_back(l);
    all.insert(all.end(), m.records().begin(), m.records().end());
  }
  std::vector<DatasetRecord> out;
  for (Split s : {Split::Train, Split::Test, Split::Unassigned}) {
    std::vector<DatasetRecord> part;
    for (const auto& r : all)
      if (r.split == s) part.push_back(r);
    const auto perm = rng.permutation(part.size());
    for (std::size_t i : perm) out.push_back(part[i]);
  }
  std::sort(labels.begin(), labels.end());
  Manifest m(std::move(out), base);
  m.set_labels(labels);
  return m;
}

}  // namespace dsbias
