#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace modviz {

/// Ordered `key: value` text document (UTF-8, one pair per line, `#` starts
/// a comment line). Used for configs, manifests and report headers.
class KeyValues {
 public:
  KeyValues() = default;

  static KeyValues parse(std::string_view text);
  static KeyValues read_file(const std::string& path);
  void write_file(const std::string& path) const;
  std::string to_string() const;

  /// Replaces an existing key in place, otherwise appends.
  void set(std::string key, std::string value);
  void set(std::string key, const char* value) { set(std::move(key), std::string(value)); }
  void set(std::string key, double value);
  void set(std::string key, std::int64_t value);
  void set(std::string key, int value) { set(std::move(key), static_cast<std::int64_t>(value)); }
  void set(std::string key, std::size_t value) { set(std::move(key), static_cast<std::int64_t>(value)); }
  void set_uint(std::string key, std::uint64_t value);

  bool contains(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string fallback) const;
  std::string require(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  std::uint64_t get_uint(std::string_view key, std::uint64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  /// Copies every pair of `other` over this one (other wins).
  void merge(const KeyValues& other);

  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }
  bool empty() const { return items_.empty(); }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);
std::vector<std::string> split_list(std::string_view text, char sep = ',');
std::string trim(std::string_view text);

}  // namespace modviz
