#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "vigil/error.hpp"

namespace vigil {

inline std::string trim(std::string_view s) {
  auto b = s.begin();
  auto e = s.end();
  while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  return {b, e};
}

inline std::string fold_case(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Flat "key = value" text; '#' starts a comment line. Later keys win.
class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse(std::string_view text) {
    KeyValueFile kv;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw Error(Errc::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
      }
      auto key = trim(std::string_view(t).substr(0, eq));
      if (key.empty()) throw Error(Errc::ConfigError, "line " + std::to_string(lineno) + ": empty key");
      kv.values_[key] = trim(std::string_view(t).substr(eq + 1));
    }
    return kv;
  }

  static KeyValueFile load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_or(const std::string& key, std::string fallback) const { return get(key).value_or(std::move(fallback)); }

  template <typename Number>
  Number number_or(const std::string& key, Number fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    Number out{};
    const auto* first = v->data();
    const auto* last = v->data() + v->size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) throw Error(Errc::ConfigError, "key '" + key + "' is not a number: " + *v);
    return out;
  }

  bool flag_or(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    const auto f = fold_case(*v);
    if (f == "1" || f == "true" || f == "on" || f == "yes") return true;
    if (f == "0" || f == "false" || f == "off" || f == "no") return false;
    throw Error(Errc::ConfigError, "key '" + key + "' is not a boolean: " + *v);
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace vigil
