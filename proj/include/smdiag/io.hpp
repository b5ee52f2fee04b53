#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "smdiag/common.hpp"

namespace smdiag {

/// Flat key = value configuration with strict parsing. Lines hold one
/// assignment each; '#' starts a comment; keys are dot-separated words.
/// Every key must be consumed by the reader; leftovers are reported as
/// unknown keys so a misspelled tolerance can never silently disappear.
class Config {
 public:
  Config() = default;

  static Config from_string(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::string t = trim(line);
      if (t.empty()) continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": expected key = value");
      std::string key = trim(t.substr(0, eq));
      std::string val = trim(t.substr(eq + 1));
      if (key.empty() || !valid_key(key))
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": bad key '" + key + "'");
      if (c.kv_.count(key))
        throw std::invalid_argument("config: duplicate key '" + key + "'");
      c.kv_[key] = val;
    }
    return c;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) {
    if (!valid_key(key)) throw std::invalid_argument("config: bad key '" + key + "'");
    kv_[key] = value;
  }

  std::string get_str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw std::invalid_argument("config: missing key '" + key + "'");
    consumed_.insert(key);
    return it->second;
  }

  std::string get_str(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_str(key) : fallback;
  }

  double get_real(const std::string& key) const { return parse_real(key, get_str(key)); }

  double get_real(const std::string& key, double fallback) const {
    return has(key) ? get_real(key) : fallback;
  }

  long long get_int(const std::string& key) const {
    std::string s = get_str(key);
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("config: key '" + key + "' is not an integer");
    }
    if (pos != s.size())
      throw std::invalid_argument("config: key '" + key + "' is not an integer");
    return v;
  }

  long long get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  std::vector<double> get_reals(const std::string& key) const {
    std::string s = get_str(key);
    std::vector<double> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(parse_real(key, trim(item)));
    if (out.empty())
      throw std::invalid_argument("config: key '" + key + "' holds an empty list");
    return out;
  }

  std::vector<double> get_reals(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? get_reals(key) : std::move(fallback);
  }

  /// FNV-1a over the sorted key=value lines: a stable fingerprint that goes
  /// into every summary so artifacts can be traced to their exact settings.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const std::string& s) {
      for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
      }
    };
    for (const auto& [k, v] : kv_) {
      mix(k);
      mix("=");
      mix(v);
      mix("\n");
    }
    return h;
  }

  /// Throws listing any key never read by a getter.
  void require_all_consumed() const {
    std::string unknown;
    for (const auto& [k, v] : kv_)
      if (!consumed_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    if (!unknown.empty())
      throw std::invalid_argument("config: unknown key(s): " + unknown);
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static bool valid_key(const std::string& k) {
    for (char c : k)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' && c != '-')
        return false;
    return true;
  }

  static double parse_real(const std::string& key, const std::string& s) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("config: key '" + key + "' is not a number");
    }
    if (pos != s.size())
      throw std::invalid_argument("config: key '" + key + "' is not a number");
    return v;
  }

  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> consumed_;
};

/// Fixed-format numeric cell: 17 significant digits round-trips a double
/// exactly and keeps output byte-stable across runs and thread counts.
inline std::string csv_cell(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_cell(std::size_t v) { return std::to_string(v); }
inline std::string csv_cell(long long v) { return std::to_string(v); }

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& file, const std::string& header) : path_(file) {
    std::filesystem::create_directories(file.parent_path());
    out_.open(file);
    if (!out_) throw std::runtime_error("cannot open " + file.string() + " for writing");
    out_ << header << '\n';
  }

  template <class... Cells>
  void row(Cells... cells) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, out_ << csv_cell(cells)), ...);
    out_ << '\n';
  }

  void line(const std::string& raw) { out_ << raw << '\n'; }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace smdiag
