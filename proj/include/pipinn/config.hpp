#pragma once

// Key-value experiment configs: one `key = value` pair per line, '#' comments,
// order-independent. Values stay strings until a typed getter parses them;
// unknown keys are rejected up front so typos surface with their field path.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pipinn/errors.hpp"

namespace pipinn {

class KvConfig {
 public:
  static KvConfig parse_text(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      if (cfg.values_.count(key))
        throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KvConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    KvConfig cfg = parse_text(buf.str());
    cfg.path_ = path;
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(where(key) + ": missing required key");
    touched_.insert(key);
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) const { return parse_double(key, get_string(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long get_int(const std::string& key) const {
    const std::string v = get_string(key);
    try {
      std::size_t pos = 0;
      const long out = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return out;
    } catch (...) {
      throw ConfigError(where(key) + ": '" + v + "' is not an integer");
    }
  }
  long get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    try {
      std::size_t pos = 0;
      const std::uint64_t out = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return out;
    } catch (...) {
      throw ConfigError(where(key) + ": '" + v + "' is not an unsigned integer");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(where(key) + ": '" + v + "' is not a boolean");
  }

  // comma- or space-separated integers (e.g. "2,4,8")
  std::vector<long> get_int_list(const std::string& key) const {
    std::vector<long> out;
    std::string v = get_string(key);
    for (char& c : v)
      if (c == ',') c = ' ';
    std::istringstream in(v);
    long x;
    while (in >> x) out.push_back(x);
    if (out.empty()) throw ConfigError(where(key) + ": empty list");
    return out;
  }

  // every key must have been read by a getter; catches misspelled fields
  void reject_unknown() const {
    for (const auto& [key, value] : values_)
      if (!touched_.count(key))
        throw ConfigError(where(key) + ": unknown key (value '" + value + "')");
  }

  const std::map<std::string, std::string>& raw() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  std::string where(const std::string& key) const {
    return (path_.empty() ? std::string("config") : path_) + " key '" + key + "'";
  }

  double parse_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return out;
    } catch (...) {
      throw ConfigError(where(key) + ": '" + v + "' is not a number");
    }
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> touched_;
  std::string path_;
};

}  // namespace pipinn
