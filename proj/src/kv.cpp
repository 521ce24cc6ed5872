#include "modered/kv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "modered/errors.hpp"

namespace modered {

std::string format_sig17(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

double parse_double(const std::string& text, const std::string& context) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  require(end != text.c_str() && *end == '\0' && errno != ERANGE,
          ErrorCode::invalid_argument,
          context + ": not a number: '" + text + "'");
  return v;
}

std::int64_t parse_int(const std::string& text, const std::string& context) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  require(end != text.c_str() && *end == '\0' && errno != ERANGE,
          ErrorCode::invalid_argument,
          context + ": not an integer: '" + text + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& text, const std::string& context) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  require(end != text.c_str() && *end == '\0' && errno != ERANGE &&
              text.find('-') == std::string::npos,
          ErrorCode::invalid_argument,
          context + ": not an unsigned integer: '" + text + "'");
  return v;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void KeyValueFile::set(const std::string& key, const std::string& value) {
  for (auto& item : items_)
    if (item.first == key) {
      item.second = value;
      return;
    }
  items_.emplace_back(key, value);
}

void KeyValueFile::set(const std::string& key, double value) {
  set(key, format_sig17(value));
}

void KeyValueFile::set(const std::string& key, std::int64_t value) {
  set(key, std::to_string(value));
}

void KeyValueFile::set(const std::string& key, std::uint64_t value) {
  set(key, std::to_string(value));
}

void KeyValueFile::comment(const std::string& text) {
  items_.emplace_back(std::string(), text);
}

bool KeyValueFile::has(const std::string& key) const {
  for (const auto& item : items_)
    if (!item.first.empty() && item.first == key) return true;
  return false;
}

const std::string& KeyValueFile::get(const std::string& key) const {
  for (const auto& item : items_)
    if (item.first == key) return item.second;
  fail(ErrorCode::invalid_argument, "missing key: " + key);
}

std::string KeyValueFile::get_or(const std::string& key,
                                 const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double KeyValueFile::get_double(const std::string& key) const {
  return parse_double(get(key), "key " + key);
}

double KeyValueFile::get_double_or(const std::string& key,
                                   double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t KeyValueFile::get_int(const std::string& key) const {
  return parse_int(get(key), "key " + key);
}

std::int64_t KeyValueFile::get_int_or(const std::string& key,
                                      std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValueFile::get_uint(const std::string& key) const {
  return parse_uint(get(key), "key " + key);
}

std::uint64_t KeyValueFile::get_uint_or(const std::string& key,
                                        std::uint64_t fallback) const {
  return has(key) ? get_uint(key) : fallback;
}

std::string KeyValueFile::to_string() const {
  std::ostringstream out;
  for (const auto& item : items_) {
    if (item.first.empty())
      out << "# " << item.second << "\n";
    else
      out << item.first << " = " << item.second << "\n";
  }
  return out.str();
}

KeyValueFile KeyValueFile::parse(const std::string& text,
                                 const std::string& context) {
  KeyValueFile kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    require(eq != std::string::npos, ErrorCode::invalid_argument,
            context + ": line " + std::to_string(line_no) + " has no '='");
    const std::string key = trim(t.substr(0, eq));
    require(!key.empty(), ErrorCode::invalid_argument,
            context + ": line " + std::to_string(line_no) + " has empty key");
    kv.items_.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return kv;
}

void KeyValueFile::save(const std::string& path) const {
  write_text_file(path, to_string());
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  return parse(read_text_file(path), path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io_failure, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::io_failure, "cannot write " + path);
  out << content;
  out.flush();
  require(out.good(), ErrorCode::io_failure, "write failed for " + path);
}

}  // namespace modered
