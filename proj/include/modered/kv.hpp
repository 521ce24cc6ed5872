#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace modered {

// One number formatting rule for every artifact: decimal notation with 17
// significant digits, enough to round-trip an IEEE double exactly.
std::string format_sig17(double value);

double parse_double(const std::string& text, const std::string& context);
std::int64_t parse_int(const std::string& text, const std::string& context);
std::uint64_t parse_uint(const std::string& text, const std::string& context);

// Ordered `key = value` plain-text file.  Lines starting with '#' and blank
// lines are ignored; keys are free-form up to the first '='.  Used for
// coupling tables, experiment specs, fitted-parameter files and manifests.
class KeyValueFile {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // throws if missing
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key) const;
  std::uint64_t get_uint_or(const std::string& key,
                            std::uint64_t fallback) const;

  void comment(const std::string& text);  // emitted in order with the keys

  const std::vector<std::pair<std::string, std::string>>& items() const {
    return items_;
  }

  std::string to_string() const;
  static KeyValueFile parse(const std::string& text,
                            const std::string& context);

  void save(const std::string& path) const;
  static KeyValueFile load(const std::string& path);

 private:
  // Comments are stored with an empty key so ordering survives a save.
  std::vector<std::pair<std::string, std::string>> items_;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace modered
