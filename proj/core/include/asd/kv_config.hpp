// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

/// Flat `key = value` configuration text with `#` comments.
namespace asd::config {

class KeyValues {
 public:
  /// Parses text; rejects malformed lines and duplicate keys.
  static KeyValues parse(std::string_view text);

  /// Inserts or replaces (keeps the original position on replace).
  void set(std::string key, std::string value);
  std::optional<std::string> get(std::string_view key) const;
  bool contains(std::string_view key) const { return get(key).has_value(); }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  /// One `key = value` line per entry, in insertion order.
  std::string to_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest text that parses back to the identical double.
std::string format_double(double value);
std::string format_list(const std::vector<double>& values);

double parse_double(std::string_view text, std::string_view key);
std::uint64_t parse_uint(std::string_view text, std::string_view key);
std::int64_t parse_int(std::string_view text, std::string_view key);
bool parse_bool(std::string_view text, std::string_view key);
/// Comma-separated reals.
std::vector<double> parse_double_list(std::string_view text, std::string_view key);
/// Comma-separated tokens, whitespace trimmed.
std::vector<std::string> parse_string_list(std::string_view text);

std::string_view trim(std::string_view s);

}  // namespace asd::config
