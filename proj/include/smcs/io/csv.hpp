#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "smcs/errors.hpp"

namespace smcs::io {

/// Shortest-exact double formatting is not needed; %.17g round-trips every
/// finite double, which is what the lossless CSV contract requires.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw Error("CsvWriter: cannot open " + path.string());
    path_ = path.string();
  }

  void header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out_ << ',';
      out_ << cols[i];
    }
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_double(values[i]);
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) throw Error("CsvWriter: write failed for " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("read_csv: cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.c_str();
    char* end = nullptr;
    while (*p) {
      row.push_back(std::strtod(p, &end));
      if (end == p) throw Error("read_csv: bad number in " + path.string());
      p = end;
      if (*p == ',') ++p;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace smcs::io
