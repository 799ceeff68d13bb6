#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hetfraud {

// Flat key-value configuration. File syntax: one `key = value` per line,
// `#` starts a comment. Later assignments override earlier ones, so
// command-line overrides are applied with set() after load().
class KeyValueConfig {
 public:
  static KeyValueConfig load(const std::filesystem::path& path);
  static KeyValueConfig parse(std::istream& in, std::string_view source);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> find(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list; an explicitly empty value yields an empty list.
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

  // Keys not in `known`, for typo detection.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  void write(std::ostream& out) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace hetfraud
