#pragma once

// Minimal RFC 4180 reader/writer: comma separated, double-quoted fields may
// contain commas, quotes ("") and newlines.

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace bysgnn::csv {

struct Row {
  long line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// Reads every record. Blank lines are skipped.
std::vector<Row> read_all(std::istream& in);

std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
// Strict number parse; throws ParseError (with line) on trailing junk.
double parse_double(std::string_view text, long line);

}  // namespace bysgnn::csv
