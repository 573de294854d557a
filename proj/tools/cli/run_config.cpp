#include "run_config.hpp"

#include "pdhg/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace pdhg::cli {
namespace {

std::vector<KeySpec> sweep_keys(std::vector<KeySpec> specific) {
  std::vector<KeySpec> keys = {
      {"seeds", "1", "number of seeds"},
      {"seed", "1", "first seed"},
      {"out", "pdhg-out", "output directory"},
      {"emit", "csv", "comma list of csv, svg, ratio"},
      {"workers", "1", "worker threads"},
      {"record_every", "1", "history stride"},
      {"expect_diverged", "false", "diverged runs do not change the exit code"},
      {"prune", "false", "stop runs that can no longer beat the best converged run of their (seed, variant)"},
      {"tau", "", "explicit comma list of step parameters (overrides tau_exp)"},
  };
  for (auto& k : specific) keys.push_back(std::move(k));
  std::sort(keys.begin(), keys.end(), [](const KeySpec& a, const KeySpec& b) { return a.name < b.name; });
  return keys;
}

const std::map<std::string, std::vector<KeySpec>>& table() {
  static const std::map<std::string, std::vector<KeySpec>> t = {
      {"game", sweep_keys({
                   {"size", "100", "columns n of K"},
                   {"rows", "", "rows m of K (default: size)"},
                   {"generator", "uniform", "uniform, normal, scaled-normal or sparse-uniform"},
                   {"gamma", "1,0.751", "gamma values"},
                   {"tau_exp", "-0.7:0.01:-0.3", "log10 range of tau_tilde"},
                   {"tol", "1e-5", "stopping tolerance"},
                   {"max_iter", "1000000", "iteration cap"},
                   {"gap", "false", "record the duality gap"},
               })},
      {"birkhoff", sweep_keys({
                       {"size", "50", "n"},
                       {"cost", "", "cost matrix file (default: random symmetric)"},
                       {"variants", "pdhg:1,ebalm:min", "mode:gamma list; gamma 'min' is the smallest admissible"},
                       {"tau_exp", "0.2:0.01:0.6", "log10 range of tau_tilde"},
                       {"theta", "1e-4", "eBALM shift"},
                       {"tol", "1e-8", "stopping tolerance"},
                       {"max_iter", "200000", "iteration cap"},
                   })},
      {"emd", sweep_keys({
                  {"grid", "16", "M or MxN"},
                  {"grid_step", "", "divergence scale h (default (N-1)/4)"},
                  {"rho0", "", "source density file"},
                  {"rho1", "", "target density file"},
                  {"solver", "sgs", "sgs or iebalm"},
                  {"gamma", "1,0.9,0.85,0.75", "gamma values"},
                  {"tau_exp", "-4:0.25:-2", "log10 range of tau"},
                  {"theta", "1e-6", "dual shift"},
                  {"tol", "5e-5", "stopping tolerance"},
                  {"max_iter", "100000", "iteration cap"},
                  {"allow_small_gamma", "false", "accept gamma below 3/4"},
              })},
      {"tvls", sweep_keys({
                   {"grid", "16", "M or MxN"},
                   {"density", "0.05", "density of the random R"},
                   {"r", "", "Matrix Market file for R"},
                   {"b", "", "data vector file"},
                   {"lambda", "0.01", "TV weight"},
                   {"gamma", "1,0.75", "gamma values"},
                   {"tau_exp", "-1:0.25:0", "log10 range of tau"},
                   {"theta", "1e-3", "shift of the gradient block"},
                   {"inner_epochs", "2", "BCD sweeps for the box-constrained block"},
                   {"tol", "1e-5", "stopping tolerance"},
                   {"max_iter", "100000", "iteration cap"},
                   {"allow_small_gamma", "false", "accept gamma below 3/4"},
               })},
      {"counterexample",
       {
           {"emit", "csv", "comma list of csv"},
           {"kind", "bilinear", "bilinear or quadratic"},
           {"max_iter", "100000", "simulation horizon"},
           {"out", "pdhg-out", "output directory"},
           {"rho3", "0.4,0.5,0.6", "rho3 grid (quadratic)"},
           {"tau", "2", "primal step tau"},
           {"taus", "4/3", "products tau*sigma (bilinear)"},
           {"x0", "1,0", "start (x, y)"},
       }},
      {"check",
       {
           {"alpha", "1", "diagonal preconditioner exponent"},
           {"delta", "0", "diagonal preconditioner offset"},
           {"gamma1", "1", "scale of M1"},
           {"gamma2", "1", "scale of M2"},
           {"k", "", "operator file"},
           {"m1", "", "M1 file: scalar, vector (diagonal) or square matrix"},
           {"m2", "", "M2 file"},
           {"max_iter", "200000", "power iteration cap"},
           {"sigma_f", "", "strong-convexity diagonal file"},
           {"tol", "1e-13", "power iteration tolerance"},
       }},
  };
  return t;
}

const KeySpec* find_key(const std::string& problem, const std::string& key) {
  for (const auto& k : known_keys(problem)) {
    if (k.name == key) return &k;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

}  // namespace

const std::vector<std::string>& problems() {
  static const std::vector<std::string> p = {"game", "birkhoff", "emd", "tvls", "counterexample", "check"};
  return p;
}

const std::vector<KeySpec>& known_keys(const std::string& problem) {
  const auto it = table().find(problem);
  if (it == table().end()) throw ConfigError("unknown problem '" + problem + "'");
  return it->second;
}

std::string RunConfig::get(const std::string& key) const {
  const KeySpec* spec = find_key(problem, key);
  if (!spec) throw ConfigError("unknown key '" + key + "' for " + problem);
  const auto it = values.find(key);
  return it != values.end() ? it->second : spec->default_value;
}

bool RunConfig::has(const std::string& key) const { return !get(key).empty(); }

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!find_key(problem, key)) throw ConfigError("unknown key '" + key + "' for " + problem);
  if (value.find_first_of("\n#") != std::string::npos) {
    throw ConfigError("value of '" + key + "' may not contain newlines or '#'");
  }
  values[key] = trim(value);
}

double parse_real(const std::string& raw) {
  const std::string s = trim(raw);
  const auto slash = s.find('/');
  if (slash != std::string::npos) {
    const double den = parse_real(s.substr(slash + 1));
    if (den == 0.0) throw ConfigError("zero denominator in '" + s + "'");
    return parse_real(s.substr(0, slash)) / den;
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) throw ConfigError("not a number: '" + s + "'");
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string v = get(key);
  if (v.empty()) throw ConfigError("missing value for '" + key + "'");
  return parse_real(v);
}

long long RunConfig::get_int(const std::string& key) const {
  const std::string v = trim(get(key));
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("'" + key + "' needs an integer, got '" + v + "'");
  }
  return out;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string v = trim(get(key));
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no" || v.empty()) return false;
  throw ConfigError("'" + key + "' needs a boolean, got '" + v + "'");
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : get_strings(key)) out.push_back(parse_real(s));
  return out;
}

std::vector<std::string> RunConfig::get_strings(const std::string& key) const {
  const std::string v = get(key);
  if (trim(v).empty()) return {};
  return split(v, ',');
}

std::vector<double> parse_range(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() != 3) throw ConfigError("range must look like a:step:b, got '" + s + "'");
  return {parse_real(parts[0]), parse_real(parts[1]), parse_real(parts[2])};
}

std::pair<long long, long long> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  auto to_int = [&](const std::string& t) {
    const double v = parse_real(t);
    if (v < 1 || v != std::floor(v)) throw ConfigError("bad grid size '" + s + "'");
    return static_cast<long long>(v);
  };
  if (x == std::string::npos) {
    const auto n = to_int(s);
    return {n, n};
  }
  return {to_int(s.substr(0, x)), to_int(s.substr(x + 1))};
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    if (key == "problem") {
      if (!cfg.problem.empty() || !cfg.values.empty()) throw ConfigError("'problem' must be the first key");
      known_keys(value);
      cfg.problem = value;
      continue;
    }
    if (cfg.problem.empty()) throw ConfigError("'problem' must be the first key");
    cfg.set(key, value);
  }
  if (cfg.problem.empty()) throw ConfigError("config has no 'problem' key");
  return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
  known_keys(cfg.problem);
  std::string out = "problem = " + cfg.problem + "\n";
  for (const auto& [k, v] : cfg.values) {
    if (!find_key(cfg.problem, k)) throw ConfigError("unknown key '" + k + "' for " + cfg.problem);
    out += k + " = " + v + "\n";
  }
  return out;
}

}  // namespace pdhg::cli
