#pragma once

#include <string>
#include <vector>

namespace jlsgev::csv {

// Simple comma-separated tables, no quoting. Doubles are written with
// enough digits to round-trip bit-exactly.

std::vector<std::string> split(const std::string& line);

// Strict double parse; empty string is NaN (missing). Throws IoError with
// context on garbage.
double parse_double(const std::string& field, const std::string& context);
long parse_long(const std::string& field, const std::string& context);

std::string format_double(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;  // -1 if absent
};

Table read_table(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

}  // namespace jlsgev::csv
