#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>

#include <omp.h>

#include "netshock/csv.hpp"
#include "netshock/dates.hpp"
#include "netshock/error.hpp"
#include "netshock/kv_config.hpp"
#include "netshock/parallel.hpp"

namespace netshock {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::io: return "io";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::referential: return "referential";
    case ErrorCategory::dimension: return "dimension";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::convergence: return "convergence";
    case ErrorCategory::singular: return "singular";
  }
  return "unknown";
}

namespace {

int parse_fixed_int(std::string_view text, std::string_view full) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCategory::parse, "invalid date '" + std::string(full) + "'");
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

Date parse_date(std::string_view text) {
  text = trim(text);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorCategory::parse, "invalid date '" + std::string(text) + "'");
  }
  Date d{parse_fixed_int(text.substr(0, 4), text), parse_fixed_int(text.substr(5, 2), text),
         parse_fixed_int(text.substr(8, 2), text)};
  const std::chrono::year_month_day ymd{std::chrono::year{d.year}, std::chrono::month{static_cast<unsigned>(d.month)},
                                        std::chrono::day{static_cast<unsigned>(d.day)}};
  if (!ymd.ok()) throw Error(ErrorCategory::parse, "invalid date '" + std::string(text) + "'");
  return d;
}

YearMonth parse_year_month(std::string_view text) {
  text = trim(text);
  if (text.size() != 7 || text[4] != '-') {
    throw Error(ErrorCategory::parse, "invalid year-month '" + std::string(text) + "'");
  }
  YearMonth ym{parse_fixed_int(text.substr(0, 4), text), parse_fixed_int(text.substr(5, 2), text)};
  if (ym.month < 1 || ym.month > 12) {
    throw Error(ErrorCategory::parse, "invalid year-month '" + std::string(text) + "'");
  }
  return ym;
}

std::string to_string(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

std::string to_string(const YearMonth& ym) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", ym.year, ym.month);
  return buf;
}

void set_thread_count(int threads) {
  omp_set_num_threads(threads > 0 ? threads : omp_get_num_procs());
}

int thread_count() { return omp_get_max_threads(); }

// ---------------------------------------------------------------------------
// CSV

namespace csv {

std::vector<std::string> split_line(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::string current;
  bool in_quotes = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      if (!current.empty() || was_quoted) throw ParseError(line_no, "unexpected quote");
      in_quotes = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
      was_quoted = false;
    } else {
      if (was_quoted) throw ParseError(line_no, "characters after closing quote");
      current.push_back(c);
    }
  }
  if (in_quotes) throw ParseError(line_no, "unterminated quoted field");
  fields.push_back(std::move(current));
  return fields;
}

Reader::Reader(std::istream& in, std::vector<std::string> expected_header)
    : in_(in), header_(std::move(expected_header)) {
  std::string first;
  if (!std::getline(in_, first)) throw Error(ErrorCategory::schema, "missing CSV header");
  line_ = 1;
  if (first.size() >= 3 && static_cast<unsigned char>(first[0]) == 0xEF) first.erase(0, 3);  // UTF-8 BOM
  auto got = split_line(first, line_);
  for (auto& f : got) f = std::string(trim(f));
  if (got != header_) {
    std::string expected;
    for (const auto& h : header_) expected += (expected.empty() ? "" : ",") + h;
    throw Error(ErrorCategory::schema, "header mismatch: expected '" + expected + "'");
  }
}

bool Reader::next(std::vector<std::string>& fields) {
  while (std::getline(in_, buffer_)) {
    ++line_;
    if (trim(buffer_).empty()) continue;
    fields = split_line(buffer_, line_);
    return true;
  }
  return false;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NA";
  if (value == 0.0) return "0";  // folds -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string quote_if_needed(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

Writer::Writer(std::ostream& out, const std::vector<std::string>& header) : out_(out) {
  for (const auto& h : header) field(h);
  end_row();
}

Writer& Writer::field(std::string_view text) {
  if (!first_) out_ << ',';
  out_ << quote_if_needed(text);
  first_ = false;
  return *this;
}

Writer& Writer::field(double value) { return field(std::string_view(format_double(value))); }

Writer& Writer::field(long long value) { return field(std::string_view(std::to_string(value))); }

void Writer::end_row() {
  out_ << '\n';
  first_ = true;
}

double parse_double(std::string_view text, std::size_t line_no, std::string_view what) {
  text = trim(text);
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ParseError(line_no, "invalid number for " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text, std::size_t line_no, std::string_view what) {
  text = trim(text);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError(line_no, "invalid integer for " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view text, std::size_t line_no, std::string_view what) {
  text = trim(text);
  if (text == "1" || text == "true" || text == "TRUE" || text == "True") return true;
  if (text == "0" || text == "false" || text == "FALSE" || text == "False") return false;
  throw ParseError(line_no, "invalid boolean for " + std::string(what) + ": '" + std::string(text) + "'");
}

}  // namespace csv

// ---------------------------------------------------------------------------
// Key-value configuration

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");
    cfg.values_[std::string(key)] = std::string(value);
    if (end == text.size()) break;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  auto in = csv::open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    return csv::parse_double(*v, 0, key);
  } catch (const ParseError&) {
    throw Error(ErrorCategory::parse, "config key '" + key + "': invalid number '" + *v + "'");
  }
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    return csv::parse_int(*v, 0, key);
  } catch (const ParseError&) {
    throw Error(ErrorCategory::parse, "config key '" + key + "': invalid integer '" + *v + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    return csv::parse_bool(*v, 0, key);
  } catch (const ParseError&) {
    throw Error(ErrorCategory::parse, "config key '" + key + "': invalid boolean '" + *v + "'");
  }
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  auto v = get(key);
  if (!v) return out;
  std::string_view rest = *v;
  while (!rest.empty()) {
    auto comma = rest.find(',');
    auto item = trim(rest.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::string KeyValueConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace netshock
