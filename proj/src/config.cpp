// SPDX-License-Identifier: Apache-2.0
#include "dsbias/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dsbias/error.hpp"

namespace dsbias {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueDoc KeyValueDoc::parse(const std::string& text, const std::string& origin) {
  KeyValueDoc doc;
  doc.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (doc.values_.contains(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    doc.values_[key] = value;
  }
  return doc;
}

KeyValueDoc KeyValueDoc::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<std::string> KeyValueDoc::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

std::string KeyValueDoc::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::string KeyValueDoc::require_string(const std::string& key) const {
  auto v = get(key);
  if (!v) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return *v;
}

double KeyValueDoc::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key + "' expects a number, got '" + *v + "'");
  }
}

long long KeyValueDoc::get_int(const std::string& key, long long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size())
    throw ConfigError(origin_ + ": key '" + key + "' expects an integer, got '" + *v + "'");
  return out;
}

bool KeyValueDoc::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError(origin_ + ": key '" + key + "' expects a boolean, got '" + *v + "'");
}

std::vector<long long> KeyValueDoc::get_int_list(const std::string& key,
                                                 const std::vector<long long>& fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::vector<long long> out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    long long x = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
      throw ConfigError(origin_ + ": key '" + key + "' expects a comma-separated integer list");
    out.push_back(x);
  }
  return out;
}

std::vector<std::string> KeyValueDoc::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto it = values_.lower_bound(prefix); it != values_.end() && it->first.starts_with(prefix); ++it)
    out.push_back(it->first);
  return out;
}

void KeyValueDoc::check_all_used() const {
  std::string unknown;
  for (const auto& [key, value] : values_)
    if (!used_.contains(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  if (!unknown.empty()) throw ConfigError(origin_ + ": unknown keys: " + unknown);
}

std::string KeyValueDoc::serialize() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

}  // namespace dsbias
