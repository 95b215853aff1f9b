#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hrf {

/// Raw RFC-4180 table: a header row plus string cells. Arity is not checked
/// here; consumers that know the schema do that.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, std::span<const std::string> fields);

/// Locale-independent rendering of a double. `digits` = 17 round-trips.
std::string format_number(double value, int digits = 17);
/// Strict parse of a whole field as a finite double.
bool parse_number(std::string_view text, double& value);

}  // namespace hrf
