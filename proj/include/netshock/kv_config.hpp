#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace netshock {

// Flat `key = value` text configuration. '#' starts a comment; keys are
// case-sensitive; later assignments override earlier ones.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void merge(const KeyValueConfig& other);

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  std::string serialize() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace netshock
