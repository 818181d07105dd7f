#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpmpc {

// Formats a double with enough digits to round-trip exactly, so repeated runs
// of a deterministic computation produce byte-identical files.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Minimal CSV writer: a header row fixed at construction, then one row per
// record. Cells are written verbatim; numeric helpers format via %.17g.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out_(path), ncols_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    write_row_(columns);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != ncols_) {
      throw std::runtime_error("csv row width mismatch");
    }
    write_row_(cells);
  }

  static std::string cell(double x) { return format_double(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(long x) { return std::to_string(x); }
  static std::string cell(std::size_t x) { return std::to_string(x); }
  static std::string cell(const std::string& s) { return s; }

 private:
  void write_row_(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::size_t ncols_;
};

// In-memory CSV contents: header plus raw string cells.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    throw std::runtime_error("csv column not found: " + name);
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv: " + path);
  CsvTable table;
  std::string line;
  const auto split = [](const std::string& text) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = text.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(text.substr(start));
        break;
      }
      cells.push_back(text.substr(start, comma - start));
      start = comma + 1;
    }
    return cells;
  };
  if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
  table.columns = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != table.columns.size()) {
      throw std::runtime_error("csv row width mismatch in " + path);
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace gpmpc
