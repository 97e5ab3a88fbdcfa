// SPDX-License-Identifier: Apache-2.0
#include "asd/kv_config.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "asd/error.hpp"

namespace asd::config {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ContractError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ContractError("config line " + std::to_string(line_no) + ": empty key");
    if (kv.contains(key)) throw ContractError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    kv.entries_.emplace_back(key, std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

void KeyValues::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> KeyValues::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + format_double(values[i]);
  return out;
}

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view text, const char* expected) {
  throw ContractError("config key '" + std::string(key) + "': expected " + expected + ", got '" + std::string(text) +
                      "'");
}

}  // namespace

double parse_double(std::string_view text, std::string_view key) {
  text = trim(text);
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) bad_value(key, text, "a real number");
  return value;
}

std::uint64_t parse_uint(std::string_view text, std::string_view key) {
  text = trim(text);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    bad_value(key, text, "a non-negative integer");
  }
  return value;
}

std::int64_t parse_int(std::string_view text, std::string_view key) {
  text = trim(text);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) bad_value(key, text, "an integer");
  return value;
}

bool parse_bool(std::string_view text, std::string_view key) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  bad_value(key, text, "a boolean");
}

std::vector<std::string> parse_string_list(std::string_view text) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = text.find(',');
    const std::string_view item = trim(text.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return out;
}

std::vector<double> parse_double_list(std::string_view text, std::string_view key) {
  std::vector<double> out;
  for (const std::string& item : parse_string_list(text)) out.push_back(parse_double(item, key));
  return out;
}

}  // namespace asd::config
