// INI-like config parser used by world specs and pipeline configs.
//
//   [section]            sections may repeat ([region]) or carry an
//   [class grass]        argument after the name
//   key = value          '#' starts a comment, blank lines ignored
//
// Parsed files re-serialize canonically (stable order/whitespace) so a
// config hash depends only on content.
#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "terrasense/common.hpp"

namespace terra {

struct ConfigSection {
  std::string name;  // e.g. "class"
  std::string arg;   // e.g. "grass"; empty when absent
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return true;
    return false;
  }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return v;
    throw ConfigError("missing key '" + key + "' in section [" + name +
                      (arg.empty() ? "" : " " + arg) + "]");
  }

  std::string get_or(const std::string& key, const std::string& dflt) const {
    for (const auto& [k, v] : entries)
      if (k == key) return v;
    return dflt;
  }

  double get_num(const std::string& key) const {
    const std::string& s = get(key);
    try {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
        ++pos;
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' in section [" + name +
                        "]: '" + s + "' is not a number");
    }
  }

  double get_num_or(const std::string& key, double dflt) const {
    return has(key) ? get_num(key) : dflt;
  }

  long get_int(const std::string& key) const {
    double v = get_num(key);
    long i = static_cast<long>(v);
    if (static_cast<double>(i) != v)
      throw ConfigError("key '" + key + "' in section [" + name +
                        "]: expected an integer, got '" + get(key) + "'");
    return i;
  }

  long get_int_or(const std::string& key, long dflt) const {
    return has(key) ? get_int(key) : dflt;
  }

  // Vector of whitespace- or comma-separated numbers.
  std::vector<double> get_nums(const std::string& key) const {
    std::string s = get(key);
    for (char& c : s)
      if (c == ',') c = ' ';
    std::istringstream in(s);
    std::vector<double> out;
    double v;
    while (in >> v) out.push_back(v);
    if (!in.eof())
      throw ConfigError("key '" + key + "' in section [" + name +
                        "]: '" + get(key) + "' is not a number list");
    return out;
  }
};

class Config {
 public:
  static Config parse(std::istream& in, const std::string& origin = "<stream>") {
    Config cfg;
    std::string line;
    int lineno = 0;
    ConfigSection* cur = nullptr;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = strip(line);
      if (s.empty() || s[0] == '#') continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(lineno) +
                            ": unterminated section header '" + s + "'");
        std::string inner = strip(s.substr(1, s.size() - 2));
        if (inner.empty())
          throw ConfigError(origin + ":" + std::to_string(lineno) +
                            ": empty section header");
        ConfigSection sec;
        auto sp = inner.find_first_of(" \t");
        if (sp == std::string::npos) {
          sec.name = inner;
        } else {
          sec.name = inner.substr(0, sp);
          sec.arg = strip(inner.substr(sp + 1));
        }
        cfg.sections_.push_back(std::move(sec));
        cur = &cfg.sections_.back();
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected 'key = value', got '" + s + "'");
      if (!cur)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": key outside of any section");
      std::string key = strip(s.substr(0, eq));
      std::string val = strip(s.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": empty key");
      cur->entries.emplace_back(std::move(key), std::move(val));
    }
    return cfg;
  }

  static Config parse_string(const std::string& text,
                             const std::string& origin = "<string>") {
    std::istringstream in(text);
    return parse(in, origin);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse(in, path);
  }

  const std::vector<ConfigSection>& sections() const { return sections_; }

  std::vector<ConfigSection>& sections() { return sections_; }

  bool has_section(const std::string& name) const {
    for (const auto& s : sections_)
      if (s.name == name) return true;
    return false;
  }

  // First section with this name; throws when absent.
  const ConfigSection& section(const std::string& name) const {
    for (const auto& s : sections_)
      if (s.name == name) return s;
    throw ConfigError("missing section [" + name + "]");
  }

  std::vector<const ConfigSection*> all(const std::string& name) const {
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections_)
      if (s.name == name) out.push_back(&s);
    return out;
  }

  // Canonical text form: the hash of this string identifies the config.
  std::string canonical() const {
    std::string out;
    for (const auto& s : sections_) {
      out += '[';
      out += s.name;
      if (!s.arg.empty()) {
        out += ' ';
        out += s.arg;
      }
      out += "]\n";
      for (const auto& [k, v] : s.entries) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
      }
    }
    return out;
  }

  std::uint64_t hash() const { return fnv1a64(canonical()); }

 private:
  static std::string strip(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  std::vector<ConfigSection> sections_;
};

}  // namespace terra
