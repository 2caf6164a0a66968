// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dsbias {

/// Flat key/value document: one `key = value` per line, `#` starts a comment,
/// sections are expressed as dotted keys (`train.lr = 1e-4`). Readers mark
/// keys as used; `check_all_used()` rejects anything left over.
class KeyValueDoc {
 public:
  KeyValueDoc() = default;

  static KeyValueDoc parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueDoc load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<long long> get_int_list(const std::string& key, const std::vector<long long>& fallback) const;

  /// Keys beginning with `prefix` (which should end in '.').
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Throws ConfigError naming every key no getter has read.
  void check_all_used() const;

  /// Canonical serialisation: sorted keys, one `key = value` per line.
  std::string serialize() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace dsbias
