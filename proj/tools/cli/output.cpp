#include "output.hpp"

#include "pdhg/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace pdhg::cli {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io::IoError("cannot write " + path.string());
  return out;
}

void close_checked(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw io::IoError("write failed: " + path.string());
}

}  // namespace

std::string fmt_real(double v) { return fmt::format("{:.17g}", v); }

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history, bool with_gap) {
  auto out = open_out(path);
  out << (with_gap ? "k,rhat_full,rhat_half,gap,elapsed_s\n" : "k,rhat_full,rhat_half,elapsed_s\n");
  for (const auto& r : history) {
    out << r.k << ',' << fmt_real(r.rhat_full) << ',' << fmt_real(r.rhat_half) << ',';
    if (with_gap) out << fmt_real(r.gap) << ',';
    out << fmt_real(r.elapsed_s) << '\n';
  }
  close_checked(out, path);
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  auto out = open_out(path);
  out << "variant,seed,gamma,tau,iters,status,rhat_full,rhat_half\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << r.seed << ',' << fmt_real(r.gamma) << ',' << fmt_real(r.tau) << ',' << r.iters << ','
        << r.status << ',' << fmt_real(r.rhat_full) << ',' << fmt_real(r.rhat_half) << '\n';
  }
  close_checked(out, path);
}

void write_best_csv(const std::filesystem::path& path, const std::vector<BestRow>& rows) {
  auto out = open_out(path);
  out << "variant,seed,best_tau,iters\n";
  for (const auto& r : rows) out << r.variant << ',' << r.seed << ',' << fmt_real(r.tau) << ',' << r.iters << '\n';
  close_checked(out, path);
}

void write_ratio_csv(const std::filesystem::path& path, const std::vector<RatioRow>& rows) {
  auto out = open_out(path);
  out << "variant,mean_best_iters,ratio_percent\n";
  for (const auto& r : rows) out << r.variant << ',' << fmt_real(r.mean_iters) << ',' << fmt_real(r.ratio) << '\n';
  close_checked(out, path);
}

std::vector<BestRow> best_runs(const std::vector<SweepRow>& rows) {
  std::vector<BestRow> out;
  std::map<std::pair<std::string, std::uint64_t>, std::size_t> slot;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.variant, r.seed);
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, out.size()).first;
      out.push_back({r.variant, r.seed, std::numeric_limits<double>::quiet_NaN(), -1});
    }
    BestRow& b = out[it->second];
    if (r.status == "converged" && (b.iters < 0 || r.iters < b.iters)) {
      b.iters = r.iters;
      b.tau = r.tau;
    }
  }
  return out;
}

std::vector<RatioRow> ratio_table(const std::vector<BestRow>& best, const std::string& baseline) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, bool>> sums;  // (sum, complete)
  std::map<std::string, int> counts;
  for (const auto& b : best) {
    if (!sums.count(b.variant)) {
      order.push_back(b.variant);
      sums[b.variant] = {0.0, true};
    }
    auto& [sum, complete] = sums[b.variant];
    if (b.iters < 0) complete = false;
    sum += b.iters;
    ++counts[b.variant];
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto mean_of = [&](const std::string& v) {
    const auto& [sum, complete] = sums.at(v);
    return complete ? sum / counts.at(v) : nan;
  };
  std::vector<RatioRow> out;
  if (order.empty()) return out;
  const std::string base = baseline.empty() || !sums.count(baseline) ? order.front() : baseline;
  const double base_mean = mean_of(base);
  for (const auto& v : order) {
    const double m = mean_of(v);
    out.push_back({v, m, (base_mean - m) / base_mean * 100.0});
  }
  return out;
}

std::string render_svg(const std::vector<Series>& series, const std::string& title, const std::string& y_label) {
  constexpr double kW = 640, kH = 400, kL = 70, kR = 20, kT = 40, kB = 50;
  double xmax = 1.0, ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!(y > 0.0) || !std::isfinite(y)) continue;
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, std::log10(y));
      ymax = std::max(ymax, std::log10(y));
    }
  }
  if (!std::isfinite(ymin)) ymin = -1.0, ymax = 0.0;
  ymin = std::floor(ymin);
  ymax = std::ceil(ymax);
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto px = [&](double x) { return kL + x / xmax * (kW - kL - kR); };
  auto py = [&](double ly) { return kH - kB - (ly - ymin) / (ymax - ymin) * (kH - kT - kB); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
      kW, kH, kW / 2, title);
  out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", kL, kH - kB, kW - kR,
                     kH - kB);
  out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", kL, kT, kL, kH - kB);
  for (double e = ymin; e <= ymax; e += 1.0) {
    out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">1e{}</text>\n", kL - 6, py(e) + 4,
                       static_cast<int>(e));
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">iteration</text>\n", (kW + kL) / 2, kH - 12);
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", kW - kR, kH - kB + 16,
                     static_cast<long long>(xmax));
  out += fmt::format("<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>\n",
                     kH / 2, kH / 2, y_label);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = colors[i % 6];
    // Thin to at most ~2000 vertices.
    const std::size_t stride = std::max<std::size_t>(1, s.points.size() / 2000);
    std::string pts;
    for (std::size_t j = 0; j < s.points.size(); j += stride) {
      const auto [x, y] = s.points[j];
      if (!(y > 0.0) || !std::isfinite(y)) continue;
      pts += fmt::format("{:.1f},{:.1f} ", px(x), py(std::log10(y)));
    }
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, pts);
    out += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", kW - kR - 150, kT + 16 * (i + 1), color,
                       s.label);
  }
  out += "</svg>\n";
  return out;
}

}  // namespace pdhg::cli
