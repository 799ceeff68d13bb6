#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hetfraud {

struct CsvDocument {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Comma-delimited, header row, RFC 4180 double-quote escaping. Every data
// row must have as many cells as the header; the reported row number is
// 1-based over data rows.
CsvDocument read_csv(const std::filesystem::path& path);
CsvDocument parse_csv(std::istream& in, std::string_view source);

std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& cells);

}  // namespace hetfraud
