#pragma once

// Flat key = value configuration.
//
//   # comment
//   family.base = rademacher
//   family.cov.params = 1, 4
//   n = 1024
//
// Keys may carry one dot-separated group prefix (family., family.cov.).
// Values are kept as text and converted on access so that a resolved config
// can be written back out verbatim and re-read to the same values.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hdclt/core/error.hpp"

namespace hdclt {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Shortest text that parses back to exactly `x`.
inline std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = detail::trim(text);
  if (t == "inf") return INFINITY;
  double v = 0.0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw Error(ErrorKind::config, "config key '" + key + "': '" + text + "' is not a number");
  return v;
}

class Config {
 public:
  static Config parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<std::string> errors;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
        continue;
      }
      const std::string key = detail::trim(line.substr(0, eq));
      if (key.empty()) {
        errors.push_back("line " + std::to_string(lineno) + ": empty key");
        continue;
      }
      c.values_[key] = detail::trim(line.substr(eq + 1));
    }
    if (!errors.empty()) {
      std::string msg = "config parse errors:";
      for (const auto& e : errors) msg += " " + e + ";";
      throw Error(ErrorKind::config, msg);
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::io, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value) { values_[key] = format_double(value); }
  void erase(const std::string& key) { values_.erase(key); }

  std::string str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorKind::config, "config key '" + key + "' is required");
    return it->second;
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }

  double num(const std::string& key) const { return parse_double(key, str(key)); }
  double num(const std::string& key, double fallback) const {
    return has(key) ? num(key) : fallback;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const double v = num(key);
    if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19)
      throw Error(ErrorKind::config, "config key '" + key + "' must be a nonnegative integer");
    return static_cast<std::uint64_t>(v);
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::string item;
    std::istringstream in(str(key));
    while (std::getline(in, item, ',')) {
      item = detail::trim(item);
      if (!item.empty()) out.push_back(parse_double(key, item));
    }
    return out;
  }
  std::vector<double> list(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? list(key) : fallback;
  }

  /// Entries under `prefix.` with the prefix removed.
  std::map<std::string, std::string> group(const std::string& prefix) const {
    std::map<std::string, std::string> out;
    const std::string p = prefix + ".";
    for (const auto& [k, v] : values_)
      if (k.rfind(p, 0) == 0) out[k.substr(p.size())] = v;
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  std::string dump() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

inline std::string join_doubles(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += format_double(xs[i]);
  }
  return out;
}

}  // namespace hdclt
