#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace orl {

/// Flat `key = value` document: one pair per line, `#` starts a comment,
/// blank lines ignored. Keys are kept sorted when written.
class KeyValues {
 public:
  static KeyValues parse(std::istream& is);
  static KeyValues load(const std::filesystem::path& path);

  void write(std::ostream& os) const;
  /// Writes to a temporary file and renames it into place.
  void save_atomic(const std::filesystem::path& path) const;

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, int value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, std::uint64_t value) { values_[key] = std::to_string(value); }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace orl
