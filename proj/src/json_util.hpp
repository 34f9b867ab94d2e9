#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

#include "fieldgraph/error.hpp"

namespace fieldgraph::detail {

// Shortest decimal that round-trips the value rounded to float.
inline void append_f32(std::string& out, double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), static_cast<float>(value));
  out.append(buf, res.ptr);
}

inline void append_int(std::string& out, long long value) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

inline void append_string(std::string& out, std::string_view s) {
  out += nlohmann::json(std::string(s)).dump();
}

inline void append_key(std::string& out, std::string_view key) {
  append_string(out, key);
  out += ':';
}

template <typename Range>
void append_f32_array(std::string& out, const Range& values) {
  out += '[';
  bool first = true;
  for (double v : values) {
    if (!first) out += ',';
    first = false;
    append_f32(out, v);
  }
  out += ']';
}

inline nlohmann::json parse_json(std::string_view text) {
  try {
    return nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, e.what());
  }
}

inline std::string read_text(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileNotFound, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace fieldgraph::detail
