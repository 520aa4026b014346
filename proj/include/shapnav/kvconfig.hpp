#pragma once

// Flat sectioned key/value text:
//
//   # comment
//   [section]
//   key = value
//
// Keys are addressed as "section.key". Order of first appearance is kept so
// that serialized output is stable.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "shapnav/error.hpp"

namespace shapnav {

class KvConfig {
 public:
  using Entry = std::pair<std::string, std::string>;

  static KvConfig parse(const std::string& text, const std::string& origin = "<string>") {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (section.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": key '" + key +
                          "' outside of any [section]");
      cfg.set(section + "." + key, value);
    }
    return cfg;
  }

  static KvConfig load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path.string());
  }

  void set(const std::string& dotted_key, const std::string& value) {
    for (auto& [k, v] : entries_) {
      if (k == dotted_key) {
        v = value;
        return;
      }
    }
    entries_.emplace_back(dotted_key, value);
  }

  bool contains(const std::string& dotted_key) const { return find(dotted_key) != nullptr; }

  const std::string& get(const std::string& dotted_key) const {
    const std::string* v = find(dotted_key);
    if (!v) throw ConfigError("missing config key: " + dotted_key);
    return *v;
  }

  const std::string* find(const std::string& dotted_key) const {
    for (const auto& [k, v] : entries_)
      if (k == dotted_key) return &v;
    return nullptr;
  }

  const std::vector<Entry>& entries() const { return entries_; }

  std::string to_text(const std::string& header_comment = {}) const {
    std::vector<std::string> sections;
    for (const auto& [k, v] : entries_) {
      std::string s = k.substr(0, k.find('.'));
      bool seen = false;
      for (const auto& x : sections) seen = seen || x == s;
      if (!seen) sections.push_back(s);
    }
    std::ostringstream out;
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    for (std::size_t i = 0; i < sections.size(); ++i) {
      if (i > 0 || !header_comment.empty()) out << "\n";
      out << "[" << sections[i] << "]\n";
      for (const auto& [k, v] : entries_) {
        auto dot = k.find('.');
        if (k.substr(0, dot) == sections[i]) out << k.substr(dot + 1) << " = " << v << "\n";
      }
    }
    return out.str();
  }

  void save(const std::filesystem::path& path, const std::string& header_comment = {}) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write config file: " + path.string());
    f << to_text(header_comment);
    if (!f) throw IoError("write failed: " + path.string());
  }

  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  std::vector<Entry> entries_;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(KvConfig::trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(KvConfig::trim(cur));
  return out;
}

}  // namespace shapnav
