#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace difftomo {

/// Bad config file, unknown key or malformed value (usage error, exit 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& text);

/// Flat key=value settings, one per line, '#' starts a comment. Only keys
/// from the known table are accepted; missing keys take their defaults.
class RunConfig {
 public:
  RunConfig();
  static RunConfig parse(const std::string& text, const std::string& origin = "<string>");
  static RunConfig load(const std::string& path);

  /// Overrides a key (command-line flags); unknown keys throw.
  void set(const std::string& key, const std::string& value);
  bool is_set(const std::string& key) const { return explicit_.count(key) > 0; }

  const std::string& str(const std::string& key) const;
  double num(const std::string& key) const;
  int integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  /// Whitespace separated numbers; ';' separates groups.
  std::vector<std::vector<double>> groups(const std::string& key) const;

  /// Every key except `out` with its effective value, sorted, one
  /// "key=value" per line.
  std::string canonical() const;
  std::uint64_t hash() const { return fnv1a64(canonical()); }

  static const std::map<std::string, std::string>& defaults();

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

}  // namespace difftomo
