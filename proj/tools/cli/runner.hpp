#pragma once

#include "output.hpp"
#include "run_config.hpp"

#include <iosfwd>
#include <map>

namespace pdhg::cli {

struct RunOutcome {
  int exit_code = 0;
  std::vector<SweepRow> rows;
  std::vector<BestRow> best;
  std::vector<RatioRow> ratios;
  /// History of the best converged run per (variant, seed).
  std::map<std::pair<std::string, std::uint64_t>, std::vector<HistoryRow>> best_history;
};

/// Executes the configured sweep or report and writes its outputs under
/// `out`. Throws ConfigError, DimensionError or io::IoError on bad input.
/// exit_code is 2 when some run diverged and expect_diverged is off.
RunOutcome run(const RunConfig& cfg, std::ostream& log);

/// Command-line front end; returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace pdhg::cli
