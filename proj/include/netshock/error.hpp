#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace netshock {

// Machine-readable error categories. The CLI prints category_name() as the
// first token of its single-line error report.
enum class ErrorCategory {
  usage,
  io,
  parse,
  schema,
  referential,
  dimension,
  domain,
  convergence,
  singular,
};

std::string_view category_name(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

// Malformed input at a known position. line is 1-based and counts the header.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCategory::parse, "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, int iterations, double last_change)
      : Error(ErrorCategory::convergence, message), iterations_(iterations), last_change_(last_change) {}

  int iterations() const noexcept { return iterations_; }
  double last_change() const noexcept { return last_change_; }

 private:
  int iterations_;
  double last_change_;
};

}  // namespace netshock
