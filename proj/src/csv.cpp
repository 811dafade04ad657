#include "bysgnn/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "bysgnn/error.hpp"

namespace bysgnn::csv {

std::vector<Row> read_all(std::istream& in) {
  std::vector<Row> rows;
  std::string field;
  Row current;
  bool in_quotes = false;
  bool field_started = false;
  long line = 1;
  current.line = 1;
  auto end_record = [&] {
    if (field_started || !current.fields.empty()) {
      current.fields.push_back(field);
      rows.push_back(std::move(current));
    }
    current = Row{};
    field.clear();
    field_started = false;
  };
  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        current.fields.push_back(field);
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        current.line = line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field", current.line);
  end_record();
  return rows;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view text, long line) {
  std::size_t b = 0, e = text.size();
  while (b < e && (text[b] == ' ' || text[b] == '\t')) ++b;
  while (e > b && (text[e - 1] == ' ' || text[e - 1] == '\t')) --e;
  if (b == e) throw ParseError("empty numeric field", line);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data() + b, text.data() + e, v);
  if (ec != std::errc() || ptr != text.data() + e) {
    throw ParseError("not a number: '" + std::string(text) + "'", line);
  }
  return v;
}

}  // namespace bysgnn::csv
