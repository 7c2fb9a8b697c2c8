#pragma once

// Flat plain-text "key = value" files. '#' starts a comment; blank lines are
// ignored; later keys override earlier ones.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "fauseg/errors.hpp"

namespace fauseg {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& origin = "<stream>") {
    KeyValueConfig cfg;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto text = trim(line);
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(number) + ": expected 'key = value'");
      }
      auto key = trim(text.substr(0, eq));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(number) + ": empty key");
      cfg.values_[std::move(key)] = trim(text.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path.string());
    return parse(in, path.string());
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config file " + path.string());
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  template <class T>
  void set(const std::string& key, T value) {
    std::ostringstream os;
    os << value;
    values_[key] = os.str();
  }

  [[nodiscard]] bool contains(const std::string& key) const { return values_.count(key) != 0; }

  [[nodiscard]] std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] std::string get_or(const std::string& key, std::string fallback) const {
    return get(key).value_or(std::move(fallback));
  }

  template <class T>
  [[nodiscard]] T get_number_or(const std::string& key, T fallback) const {
    const auto raw = get(key);
    if (!raw) return fallback;
    T value{};
    const auto* end = raw->data() + raw->size();
    const auto [ptr, ec] = std::from_chars(raw->data(), end, value);
    if (ec != std::errc{} || ptr != end) throw ConfigError("config key '" + key + "': not a number: " + *raw);
    return value;
  }

  [[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  static std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace fauseg
