#include "hetfraud/csv.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "hetfraud/error.hpp"

namespace hetfraud {

namespace {

// Splits one logical record; returns false at end of input. Quoted fields
// may span physical lines.
bool next_record(std::istream& in, std::vector<std::string>& cells) {
  cells.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  while (true) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      any = true;
      if (quoted) {
        if (ch == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        cells.push_back(std::move(field));
        field.clear();
      } else if (ch != '\r') {
        field += ch;
      }
    }
    if (!quoted) break;
    field += '\n';
    if (!std::getline(in, line)) break;
  }
  if (any || !cells.empty()) cells.push_back(std::move(field));
  return true;
}

}  // namespace

CsvDocument parse_csv(std::istream& in, std::string_view source) {
  CsvDocument doc;
  std::vector<std::string> cells;
  if (!next_record(in, doc.header) || doc.header.empty()) {
    throw Error(ErrorKind::parse, std::string(source) + ": missing header row");
  }
  std::size_t row = 0;
  while (next_record(in, cells)) {
    if (cells.empty()) continue;  // blank line
    ++row;
    if (cells.size() != doc.header.size()) {
      throw Error(ErrorKind::parse, std::string(source) + ": row " + std::to_string(row) + " has " +
                                        std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(doc.header.size()));
    }
    doc.rows.push_back(cells);
  }
  return doc;
}

CsvDocument read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return parse_csv(in, path.string());
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(cells[i]);
  }
  out << '\n';
}

}  // namespace hetfraud
