#include "maglab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "maglab/grid.hpp"

namespace maglab {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool valid_key(const std::string& k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

/// Accepts plain numbers and fractions like "1/64".
double to_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  const auto slash = t.find('/');
  try {
    std::size_t used = 0;
    if (slash != std::string::npos) {
      const std::string num = trim(t.substr(0, slash)), den = trim(t.substr(slash + 1));
      std::size_t u1 = 0, u2 = 0;
      const double a = std::stod(num, &u1), b = std::stod(den, &u2);
      if (u1 == num.size() && u2 == den.size() && b != 0.0) return a / b;
    } else {
      const double v = std::stod(t, &used);
      if (used == t.size() && std::isfinite(v)) return v;
    }
  } catch (const std::exception&) {
  }
  throw Error("config: '" + key + "' expects a number, got '" + text + "'");
}

}  // namespace

Config Config::parse(std::istream& is, const std::string& source) {
  Config c;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(n);
    if (eq == std::string::npos) throw Error(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw Error(where + ": bad key '" + key + "'");
    if (c.values_.count(key)) throw Error(where + ": duplicate key '" + key + "'");
    c.values_[key] = value;
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("config: cannot open " + path);
  return parse(f, path);
}

void Config::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw Error("config: bad key '" + key + "'");
  values_[key] = trim(value);
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error("config: override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error("config: missing required key '" + key + "'");
  return it->second;
}

double Config::num(const std::string& key, double fallback) const {
  return has(key) ? to_number(key, values_.at(key)) : fallback;
}

double Config::num(const std::string& key) const { return to_number(key, str(key)); }

int Config::integer(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const double v = to_number(key, values_.at(key));
  if (v != std::floor(v) || std::abs(v) > 1e9) throw Error("config: '" + key + "' expects an integer");
  return static_cast<int>(v);
}

std::uint64_t Config::u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string t = values_.at(key);
  try {
    std::size_t used = 0;
    if (!t.empty() && t[0] != '-') {
      const unsigned long long v = std::stoull(t, &used);
      if (used == t.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw Error("config: '" + key + "' expects an unsigned integer, got '" + t + "'");
}

bool Config::flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = values_.at(key);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw Error("config: '" + key + "' expects true/false");
}

std::vector<double> Config::list(const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  std::stringstream ss(values_.at(key));
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_number(key, item));
  if (out.empty()) throw Error("config: '" + key + "' is an empty list");
  return out;
}

void Config::check_known(const std::vector<std::string>& known, const std::string& command) const {
  for (const auto& [k, v] : values_)
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw Error("config: unknown key '" + k + "' for " + command);
}

}  // namespace maglab
