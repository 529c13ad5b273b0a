#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wekbp/error.hpp"

namespace wekbp {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("cannot parse '" + std::string(s) + "' as a number for " + std::string(what));
  }
  return v;
}

inline long long parse_int(std::string_view s, std::string_view what) {
  s = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("cannot parse '" + std::string(s) + "' as an integer for " + std::string(what));
  }
  return v;
}

// Flat `key = value` configuration. Blank lines and `#` comments are ignored;
// later assignments to the same key override earlier ones.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse(std::string_view text, std::string_view origin = "<string>") {
    KvConfig cfg;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
      ++line_no;
      std::string_view line = raw;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected 'key = value'");
      }
      const auto key = trim(line.substr(0, eq));
      if (key.empty()) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
      }
      cfg.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static KvConfig load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::optional<std::string> find(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
  }
  std::string require_string(const std::string& key) const {
    auto v = find(key);
    if (!v) throw ConfigError("missing required config key '" + key + "'");
    return *v;
  }
  double get_double(const std::string& key, double fallback) const {
    const auto v = find(key);
    return v ? parse_double(*v, key) : fallback;
  }
  long long get_int(const std::string& key, long long fallback) const {
    const auto v = find(key);
    return v ? parse_int(*v, key) : fallback;
  }
  bool get_bool(const std::string& key, bool fallback) const {
    const auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("cannot parse '" + *v + "' as a boolean for " + key);
  }

  // All (key, value) pairs whose key starts with `prefix`, with the prefix stripped.
  std::vector<std::pair<std::string, std::string>> with_prefix(std::string_view prefix) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [k, v] : values_) {
      if (k.size() > prefix.size() && std::string_view(k).substr(0, prefix.size()) == prefix) {
        out.emplace_back(k.substr(prefix.size()), v);
      }
    }
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace wekbp
