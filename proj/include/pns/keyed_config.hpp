#pragma once

// Reader for the small TOML-style keyed text format used by the pipeline and
// simulator config files:
//
//   # comment
//   lambda_r = 0.5
//   buckets = [-3.5, -3, 0, 3.5]
//   [backend]
//   kind = "mock"
//
// Keys inside a [section] are addressed as "section.key". Values are strings,
// numbers, booleans or flat arrays of numbers.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace pns {

class KeyedConfig {
 public:
  using Value = std::variant<std::string, double, bool, std::vector<double>>;

  static KeyedConfig parse(const std::string& text);
  static KeyedConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  double get_number(const std::string& key, double fallback) const;
  long long get_integer(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_numbers(const std::string& key, const std::vector<double>& fallback) const;

  // Throws ConfigError if any key was never read through a getter.
  // Catches misspelled keys that would otherwise be silently ignored.
  void reject_unknown_keys() const;

  const std::map<std::string, Value>& values() const { return values_; }

 private:
  const Value* find(const std::string& key) const;

  std::map<std::string, Value> values_;
  mutable std::set<std::string> consumed_;
};

}  // namespace pns
