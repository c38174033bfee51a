#include "modviz/common/kv_text.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "modviz/common/errors.hpp"

namespace modviz {

std::string trim(std::string_view text) {
  const auto* ws = " \t\r\n";
  auto b = text.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = text.find_last_not_of(ws);
  return std::string(text.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) pos = text.size();
    auto item = trim(text.substr(start, pos - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = pos + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw InvalidArgument("cannot format number");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  auto t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw InvalidArgument("not a number: '" + t + "'");
  return v;
}

std::int64_t parse_int(std::string_view text) {
  auto t = trim(text);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw InvalidArgument("not an integer: '" + t + "'");
  return v;
}

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto colon = line.find(':');
    if (colon == std::string::npos)
      throw InvalidArgument("line " + std::to_string(line_no) + ": expected 'key: value'");
    auto key = trim(std::string_view(line).substr(0, colon));
    if (key.empty()) throw InvalidArgument("line " + std::to_string(line_no) + ": empty key");
    kv.set(key, trim(std::string_view(line).substr(colon + 1)));
  }
  return kv;
}

KeyValues KeyValues::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValues::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << to_string();
  if (!out) throw IoError("write failed: " + path);
}

std::string KeyValues::to_string() const {
  std::string s;
  for (const auto& [k, v] : items_) {
    s += k;
    s += ": ";
    s += v;
    s += '\n';
  }
  return s;
}

void KeyValues::set(std::string key, std::string value) {
  for (auto& [k, v] : items_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  items_.emplace_back(std::move(key), std::move(value));
}

void KeyValues::set(std::string key, double value) { set(std::move(key), format_double(value)); }
void KeyValues::set(std::string key, std::int64_t value) { set(std::move(key), std::to_string(value)); }
void KeyValues::set_uint(std::string key, std::uint64_t value) {
  set(std::move(key), std::to_string(value));
}

bool KeyValues::contains(std::string_view key) const { return get(key).has_value(); }

std::optional<std::string> KeyValues::get(std::string_view key) const {
  for (const auto& [k, v] : items_)
    if (k == key) return v;
  return std::nullopt;
}

std::string KeyValues::get_or(std::string_view key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

std::string KeyValues::require(std::string_view key) const {
  auto v = get(key);
  if (!v) throw InvalidArgument("missing key '" + std::string(key) + "'");
  return *v;
}

double KeyValues::get_double(std::string_view key, double fallback) const {
  auto v = get(key);
  return v ? parse_double(*v) : fallback;
}

std::int64_t KeyValues::get_int(std::string_view key, std::int64_t fallback) const {
  auto v = get(key);
  return v ? parse_int(*v) : fallback;
}

std::uint64_t KeyValues::get_uint(std::string_view key, std::uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  auto t = trim(*v);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw InvalidArgument("not an unsigned integer: '" + t + "'");
  return out;
}

bool KeyValues::get_bool(std::string_view key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw InvalidArgument("not a boolean: '" + *v + "'");
}

void KeyValues::merge(const KeyValues& other) {
  for (const auto& [k, v] : other.items_) set(k, v);
}

}  // namespace modviz
