#pragma once

#include <map>
#include <optional>
#include <string>

#include "cslt/common.hpp"

namespace cslt {

// Sectioned key/value config. Precedence is flag > file > default: callers
// load the file, apply overrides, then typed getters materialize defaults so
// a snapshot written afterwards reproduces the run exactly.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::filesystem::path& path) {
    Config cfg;
    cfg.merge_file(path);
    return cfg;
  }

  void merge_file(const std::filesystem::path& path) {
    std::string section;
    for_each_line(path, [&](size_t lineno, const std::string& raw) {
      std::string line = trim(raw);
      if (line.empty() || line[0] == '#' || line[0] == ';') return;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("bad section header at line " + std::to_string(lineno) + " in " +
                            path.string());
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError("empty section name at line " + std::to_string(lineno));
        return;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected key=value at line " + std::to_string(lineno) + " in " +
                          path.string());
      if (section.empty())
        throw ConfigError("key outside any section at line " + std::to_string(lineno));
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("empty key at line " + std::to_string(lineno));
      values_[section][key] = value;
    });
  }

  // "section.key=value" override, e.g. from a CLI flag.
  void set_override(const std::string& dotted, const std::string& value) {
    auto dot = dotted.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == dotted.size())
      throw ConfigError("override key must look like section.key: " + dotted);
    values_[dotted.substr(0, dot)][dotted.substr(dot + 1)] = value;
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    values_[section][key] = value;
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = values_.find(section);
    return s != values_.end() && s->second.count(key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& def) {
    if (!has(section, key)) values_[section][key] = def;
    return values_[section][key];
  }

  std::string require_string(const std::string& section, const std::string& key) {
    if (!has(section, key))
      throw ConfigError("missing required config value [" + section + "] " + key);
    return values_[section][key];
  }

  int get_int(const std::string& section, const std::string& key, int def) {
    if (!has(section, key)) values_[section][key] = std::to_string(def);
    return parse_int(section, key);
  }

  long get_long(const std::string& section, const std::string& key, long def) {
    if (!has(section, key)) values_[section][key] = std::to_string(def);
    const std::string& v = values_[section][key];
    try {
      return std::stol(v);
    } catch (...) {
      throw ConfigError("expected integer for [" + section + "] " + key + ", got '" + v + "'");
    }
  }

  double get_double(const std::string& section, const std::string& key, double def) {
    if (!has(section, key)) {
      std::ostringstream ss;
      ss.precision(17);
      ss << def;
      values_[section][key] = ss.str();
    }
    const std::string& v = values_[section][key];
    try {
      size_t pos = 0;
      double d = std::stod(v, &pos);
      if (pos != v.size()) throw ConfigError("");
      return d;
    } catch (...) {
      throw ConfigError("expected number for [" + section + "] " + key + ", got '" + v + "'");
    }
  }

  bool get_bool(const std::string& section, const std::string& key, bool def) {
    if (!has(section, key)) values_[section][key] = def ? "true" : "false";
    std::string v = to_lower(values_[section][key]);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("expected boolean for [" + section + "] " + key + ", got '" + v + "'");
  }

  // Deterministic INI rendering (sections and keys sorted).
  std::string to_ini() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [section, kv] : values_) {
      if (!first) out << "\n";
      first = false;
      out << "[" << section << "]\n";
      for (const auto& [key, value] : kv) out << key << " = " << value << "\n";
    }
    return out.str();
  }

  void write_snapshot(const std::filesystem::path& path) const {
    write_text_file(path, to_ini());
  }

 private:
  int parse_int(const std::string& section, const std::string& key) {
    const std::string& v = values_[section][key];
    try {
      size_t pos = 0;
      int i = std::stoi(v, &pos);
      if (pos != v.size()) throw ConfigError("");
      return i;
    } catch (...) {
      throw ConfigError("expected integer for [" + section + "] " + key + ", got '" + v + "'");
    }
  }

  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace cslt
