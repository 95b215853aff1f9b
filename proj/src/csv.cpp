#include "hrf/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "hrf/error.hpp"

namespace hrf {

namespace {

// Reads one record; returns false at end of input. Quoted fields may span
// lines. `line` tracks physical lines for diagnostics.
bool read_record(std::istream& in, std::vector<std::string>& fields, long& line) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;
  ++line;
  std::string field;
  bool quoted = false, was_quoted = false;
  for (;; c = in.get()) {
    if (quoted) {
      if (c == EOF) throw ParseError("unterminated quoted field", line);
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += static_cast<char>(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty() || was_quoted) throw ParseError("stray quote inside field", line);
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else if (c == '\n' || c == EOF) {
      break;
    } else {
      if (was_quoted) throw ParseError("text after closing quote", line);
      field += static_cast<char>(c);
    }
  }
  fields.push_back(std::move(field));
  return true;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  long line = 0;
  if (!read_record(in, table.header, line)) return table;
  std::vector<std::string> fields;
  while (read_record(in, fields, line)) {
    // A trailing blank line is not a record.
    if (fields.size() == 1 && fields[0].empty() && in.peek() == EOF) break;
    table.rows.push_back(fields);
  }
  return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_csv(in);
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_csv_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(fields[i]);
  }
  out << '\n';
}

std::string format_number(double value, int digits) {
  if (value == 0.0) return "0";  // folds -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return buf;
}

bool parse_number(std::string_view text, double& value) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(value);
}

}  // namespace hrf
