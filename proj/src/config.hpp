#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace usrl {

// Flat key/value pipeline configuration. Precedence: defaults < file < environment < explicit set().
class Config {
 public:
  Config();  // all keys at their defaults

  static const std::vector<std::string>& keys();
  static bool known(const std::string& key);
  static std::string default_value(const std::string& key);
  static std::string description(const std::string& key);

  // `key = value` lines, '#' starts a comment. Unknown keys and malformed lines are all reported
  // in a single config error.
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<string>");
  // USRL_<KEY> (upper case) overrides.
  void apply_env(const std::string& prefix = "USRL_");
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::uint64_t seed() const;

  // Every problem found, for the given subcommand ("" checks values only). Input paths needed by
  // the subcommand must exist.
  std::vector<std::string> problems(const std::string& subcommand = "") const;
  void validate(const std::string& subcommand = "") const;  // throws ErrorKind::config

  // FNV-1a 64 over the sorted `key=value` lines, as 16 hex digits.
  std::string hash() const;
  std::string dump() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

bool parse_bool(const std::string& text, bool* out);
std::uint64_t fnv1a64(const std::string& data, std::uint64_t h = 0xcbf29ce484222325ull);

}  // namespace usrl
