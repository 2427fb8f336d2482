#pragma once

#include <cstddef>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace netshock::csv {

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes;
// records spanning several physical lines are not supported.
std::vector<std::string> split_line(std::string_view line, std::size_t line_no);

// Streaming reader that enforces an exact header.
class Reader {
 public:
  Reader(std::istream& in, std::vector<std::string> expected_header);

  // Returns false at end of input. Blank lines are skipped.
  bool next(std::vector<std::string>& fields);

  std::size_t line() const noexcept { return line_; }
  const std::vector<std::string>& header() const noexcept { return header_; }

 private:
  std::istream& in_;
  std::vector<std::string> header_;
  std::string buffer_;
  std::size_t line_ = 0;
};

// Opens a file or throws Error{io}.
std::ifstream open_input(const std::string& path);
std::ofstream open_output(const std::string& path);

// Shortest round-trip decimal representation; identical bytes on every run.
std::string format_double(double value);

std::string quote_if_needed(std::string_view field);

class Writer {
 public:
  Writer(std::ostream& out, const std::vector<std::string>& header);

  Writer& field(std::string_view text);
  Writer& field(double value);
  Writer& field(long long value);
  Writer& field(int value) { return field(static_cast<long long>(value)); }
  Writer& field(std::size_t value) { return field(static_cast<long long>(value)); }
  void end_row();

 private:
  std::ostream& out_;
  bool first_ = true;
};

double parse_double(std::string_view text, std::size_t line_no, std::string_view what);
long long parse_int(std::string_view text, std::size_t line_no, std::string_view what);
bool parse_bool(std::string_view text, std::size_t line_no, std::string_view what);

}  // namespace netshock::csv
