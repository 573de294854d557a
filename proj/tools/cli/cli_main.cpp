#include "pdhg/io.hpp"
#include "runner.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace pdhg::cli {
namespace {

std::string flag_name(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io::IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Preconditioned PDHG benchmarks and certificates"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    std::string config_path;
    bool dump = false;
    std::map<std::string, std::string> flags;
  };
  static const std::map<std::string, std::string> about = {
      {"game", "matrix game on the simplex, swept over tau_tilde and gamma"},
      {"birkhoff", "projection onto the Birkhoff polytope, PDHG against eBALM"},
      {"emd", "earth mover's distance on a grid with an sGS or inexact dual step"},
      {"tvls", "TV-regularized least squares"},
      {"counterexample", "2x2 toy dynamics at and beyond the step-size boundary"},
      {"check", "convergence-condition report for user-supplied K, M1, M2"},
  };
  std::map<std::string, Sub> subs;
  for (const auto& problem : problems()) {
    Sub& s = subs[problem];
    s.app = app.add_subcommand(problem, about.at(problem));
    s.app->add_option("--config", s.config_path, "key = value file; flags override its entries");
    s.app->add_flag("--dump-config", s.dump, "print the effective config and exit");
    for (const auto& key : known_keys(problem)) {
      auto* opt = s.app->add_option(flag_name(key.name), s.flags[key.name], key.help);
      if (!key.default_value.empty()) opt->description(key.help + " [" + key.default_value + "]");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    for (auto& [problem, s] : subs) {
      if (!s.app->parsed()) continue;
      RunConfig cfg;
      cfg.problem = problem;
      if (!s.config_path.empty()) {
        cfg = parse_config(read_file(s.config_path));
        if (cfg.problem != problem) throw ConfigError("config file is for '" + cfg.problem + "'");
      }
      for (const auto& key : known_keys(problem)) {
        if (s.app->count(flag_name(key.name)) > 0) cfg.set(key.name, s.flags[key.name]);
      }
      if (s.dump) {
        std::cout << serialize_config(cfg);
        return 0;
      }
      return run(cfg, std::cout).exit_code;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << '\n';
    return 1;
  } catch (const io::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace pdhg::cli
