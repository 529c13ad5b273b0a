#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "wekbp/error.hpp"
#include "wekbp/kv_config.hpp"

namespace wekbp {

// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error("cannot format double");
  return std::string(buf, ptr);
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
  if (ec != std::errc{}) throw Error("cannot format double");
  return std::string(buf, ptr);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

// Non-empty, non-comment lines of a CSV file split on commas.
inline std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& raw : split(read_text_file(path), '\n')) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    rows.push_back(split(line, ','));
  }
  return rows;
}

}  // namespace wekbp
