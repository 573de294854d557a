#pragma once

#include <map>
#include <string>
#include <vector>

namespace pdhg::cli {

struct KeySpec {
  std::string name;           // config key, snake_case; flag is --name with '_' -> '-'
  std::string default_value;  // empty: unset
  std::string help;
};

/// Subcommands: game, birkhoff, emd, tvls, counterexample, check.
const std::vector<std::string>& problems();
const std::vector<KeySpec>& known_keys(const std::string& problem);

/// Flat key-value run description. Keys absent from `values` take their
/// defaults.
struct RunConfig {
  std::string problem;
  std::map<std::string, std::string> values;

  bool operator==(const RunConfig&) const = default;

  /// Stored value or the key's default; throws ConfigError on unknown keys.
  std::string get(const std::string& key) const;
  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  /// Comma-separated reals; each entry may be a fraction like 4/3.
  std::vector<double> get_list(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;
};

/// Lines `key = value`; '#' starts a comment. The first key must be `problem`.
/// Unknown keys and duplicates are rejected.
RunConfig parse_config(const std::string& text);
/// Inverse of parse_config (problem first, remaining keys sorted).
std::string serialize_config(const RunConfig& cfg);

double parse_real(const std::string& s);
/// "a:step:b" -> {a, step, b}.
std::vector<double> parse_range(const std::string& s);
/// "16" -> (16, 16); "16x12" -> (16, 12).
std::pair<long long, long long> parse_grid(const std::string& s);

}  // namespace pdhg::cli
