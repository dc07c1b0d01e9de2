#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "flowdeck/data.hpp"

namespace flowdeck {

namespace detail {

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kInvalidArgument, "cannot open input file '" + path + "'");
  return in;
}

}  // namespace detail

/// Newline-delimited text: one unkeyed text record per line.
inline std::vector<Record> read_text_records(std::istream& in) {
  std::vector<Record> out;
  std::string line;
  while (std::getline(in, line)) {
    detail::strip_cr(line);
    out.push_back(Record::unkeyed(Value(line)));
  }
  return out;
}

inline std::vector<Record> read_text_records(const std::string& path) {
  auto in = detail::open_input(path);
  return read_text_records(in);
}

/// Parses a `key,value` field as int64 when the whole field is an integer,
/// otherwise keeps it as text.
inline Value parse_csv_field(const std::string& field) {
  std::int64_t v = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (!field.empty() && ec == std::errc() && ptr == end) return Value(v);
  return Value(field);
}

/// Two-column `key,value` rows: keyed records with a text key. Blank lines
/// are skipped; a row without a comma is a parse error.
inline std::vector<Record> read_csv_records(std::istream& in) {
  std::vector<Record> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      fail(ErrorKind::kParseError, "line " + std::to_string(line_no) + ": expected key,value");
    }
    out.push_back(Record::keyed(Value(line.substr(0, comma)), parse_csv_field(line.substr(comma + 1))));
  }
  return out;
}

inline std::vector<Record> read_csv_records(const std::string& path) {
  auto in = detail::open_input(path);
  return read_csv_records(in);
}

/// Picks CSV ingestion for `.csv` paths and text ingestion otherwise.
inline std::vector<Record> read_records(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return read_csv_records(path);
  return read_text_records(path);
}

}  // namespace flowdeck
