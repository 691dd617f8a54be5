#pragma once

#include <fstream>
#include <istream>
#include <set>
#include <string>
#include <vector>

#include "artl/error.hpp"

namespace artl::io {

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Flat `key = value` lines; `#` starts a comment, blank lines are ignored.
/// Keys may be written with dashes or underscores (`t_static` == `t-static`).
inline std::vector<ConfigEntry> parse_config(std::istream& in, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::set<std::string> seen;
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(number) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(where + "expected key=value");
    ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), number};
    if (e.key.empty()) throw FormatError(where + "empty key");
    for (char& c : e.key)
      if (c == '_') c = '-';
    if (!seen.insert(e.key).second) throw FormatError(where + "duplicate key '" + e.key + "'");
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<ConfigEntry> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return parse_config(in, path);
}

}  // namespace artl::io
