#pragma once

#include "pdhg/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pdhg::cli {

struct SweepRow {
  std::string variant;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  double tau = 0.0;
  int iters = 0;
  std::string status;
  double rhat_full = 0.0;
  double rhat_half = 0.0;
};

struct BestRow {
  std::string variant;
  std::uint64_t seed = 0;
  double tau = 0.0;
  int iters = -1;  // -1: no converged run
};

struct RatioRow {
  std::string variant;
  double mean_iters = 0.0;  // NaN when some seed never converged
  double ratio = 0.0;       // percent saved against the baseline
};

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (iteration, residual)
};

/// %.17g, as used for every float in the CSV outputs.
std::string fmt_real(double v);

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history, bool with_gap);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
void write_best_csv(const std::filesystem::path& path, const std::vector<BestRow>& rows);
void write_ratio_csv(const std::filesystem::path& path, const std::vector<RatioRow>& rows);

/// Best converged run per (variant, seed); ties keep the earliest row.
std::vector<BestRow> best_runs(const std::vector<SweepRow>& rows);
/// ratio = (iter_base - iter) / iter_base * 100 on the seed-averaged best
/// iteration counts. The baseline is `baseline` (first variant when empty).
std::vector<RatioRow> ratio_table(const std::vector<BestRow>& best, const std::string& baseline);

/// Log-scale residual-versus-iteration polylines.
std::string render_svg(const std::vector<Series>& series, const std::string& title, const std::string& y_label);

}  // namespace pdhg::cli
