#pragma once

// Minimal strict CSV reader for the fixed-schema files used by bellkit.
// No quoting: every field is a bare integer or decimal.

#include <charconv>
#include <cstddef>
#include <functional>
#include <istream>
#include <string>
#include <vector>

#include "bellkit/core.hpp"

namespace bellkit::csv {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] inline void fail(std::size_t line, const std::string& what) {
  throw Error("csv line " + std::to_string(line) + ": " + what);
}

inline long long int_field(const std::string& s, std::size_t line) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) fail(line, "expected an integer, got '" + s + "'");
  return v;
}

inline Sign sign_field(const std::string& s, std::size_t line) {
  const auto v = int_field(s, line);
  if (v != 1 && v != -1) fail(line, "expected 1 or -1, got '" + s + "'");
  return Sign(static_cast<int>(v));
}

inline int bit_field(const std::string& s, std::size_t line) {
  const auto v = int_field(s, line);
  if (v != 0 && v != 1) fail(line, "expected 0 or 1, got '" + s + "'");
  return static_cast<int>(v);
}

inline double real_field(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) fail(line, "expected a number, got '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    fail(line, "expected a number, got '" + s + "'");
  }
}

/// Reads a header line that must equal `header`, then calls `on_row` with
/// the fields of every non-empty data line and its 1-based line number.
inline void read(std::istream& in, const std::vector<std::string>& header,
                 const std::function<void(const std::vector<std::string>&, std::size_t)>& on_row) {
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      if (fields != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        fail(lineno, "expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != header.size()) {
      fail(lineno, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    on_row(fields, lineno);
  }
  if (!have_header) fail(lineno, "missing header");
}

}  // namespace bellkit::csv
