#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace maglab {

/// Flat key-value configuration.
///
///   # comment
///   key = value
///   list = 0.25, 0.125, 0.0625
///
/// Keys are [A-Za-z0-9_]+, duplicates are errors, trailing comments are allowed after values.
class Config {
 public:
  Config() = default;
  static Config parse(std::istream& is, const std::string& source = "<config>");
  static Config load(const std::string& path);

  /// Command-line override; replaces any value from the file.
  void set(const std::string& key, const std::string& value);
  /// "key=value" form.
  void set(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string str(const std::string& key, const std::string& fallback) const;
  std::string str(const std::string& key) const;
  double num(const std::string& key, double fallback) const;
  double num(const std::string& key) const;
  int integer(const std::string& key, int fallback) const;
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> list(const std::string& key, const std::vector<double>& fallback) const;

  /// Throws on any key not in `known`.
  void check_known(const std::vector<std::string>& known, const std::string& command) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace maglab
