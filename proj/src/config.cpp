#include "hetfraud/config.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "hetfraud/error.hpp"
#include "hetfraud/text.hpp"

namespace hetfraud {

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config " + path.string());
  return parse(in, path.string());
}

KeyValueConfig KeyValueConfig::parse(std::istream& in, std::string_view source) {
  KeyValueConfig cfg;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::config, std::string(source) + ":" + std::to_string(number) + ": expected key = value");
    }
    const auto key = trim(body.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::config, std::string(source) + ":" + std::to_string(number) + ": empty key");
    cfg.set(std::string(key), std::string(trim(body.substr(eq + 1))));
  }
  return cfg;
}

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = find(key);
  return v ? parse_double(*v, key) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  const auto v = find(key);
  return v ? parse_integer(*v, key) : fallback;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  const long long x = parse_integer(*v, key);
  if (x < 0) throw Error(ErrorKind::config, key + " must be non-negative");
  return static_cast<std::uint64_t>(x);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = find(key);
  return v ? parse_bool(*v, key) : fallback;
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key,
                                                  const std::vector<std::string>& fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  if (trim(*v).empty()) return {};
  return split(*v, ',');
}

std::vector<std::string> KeyValueConfig::unknown_keys(const std::vector<std::string>& known) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
  return out;
}

void KeyValueConfig::write(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
}

}  // namespace hetfraud
