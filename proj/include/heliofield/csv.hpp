#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "heliofield/errors.hpp"

namespace heliofield::csv {

/// Shortest round-trip decimal text for a double (printf %.17g strips
/// trailing zeros, so integral values stay compact and byte-stable).
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

/// Reads a comma-separated file with a mandatory header row. Empty cells
/// are preserved as empty strings; no quoting is supported (none of the
/// pipeline formats need it).
inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open CSV file: " + path);
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      t.header = split_line(line);
      first = false;
    } else {
      t.rows.push_back(split_line(line));
    }
  }
  if (first) throw DataError("CSV file has no header: " + path);
  return t;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot open CSV file for writing: " + path);
    path_ = path;
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) throw DataError("failed writing CSV file: " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

inline double parse_double(const std::string& cell, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw DataError("cannot parse number '" + cell + "' in " + what);
  }
}

}  // namespace heliofield::csv
