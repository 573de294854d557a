#include "runner.hpp"

#include "pdhg/counterexamples.hpp"
#include "pdhg/io.hpp"
#include "pdhg/problems.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <thread>

namespace pdhg::cli {
namespace {

namespace fs = std::filesystem;

struct Variant {
  std::string label;
  std::string mode;
  double gamma = 1.0;
  bool use_min = false;  // gamma follows the smallest admissible value at each tau
};

/// Builds one instance at the given swept parameter; reports the gamma used.
using Builder = std::function<ProblemInstance(double tau, const Variant& v, double& gamma_used)>;

struct SweepSpec {
  std::vector<Variant> variants;
  std::vector<double> taus;
  bool with_gap = false;
  bool stop_on_half = false;
  std::function<Builder(std::uint64_t seed)> make_builder;
};

struct TaskResult {
  std::vector<SweepRow> rows;
  std::vector<HistoryRow> best_history;
};

bool emits(const RunConfig& cfg, const std::string& what) {
  for (const auto& e : cfg.get_strings("emit")) {
    if (e != "csv" && e != "svg" && e != "ratio") throw ConfigError("unknown emit target '" + e + "'");
    if (e == what) return true;
  }
  return false;
}

std::string label_for(const std::string& mode, const std::string& gamma_text) { return mode + ":" + gamma_text; }

std::vector<Variant> gamma_variants(const RunConfig& cfg, const std::string& mode) {
  std::vector<Variant> out;
  for (const auto& g : cfg.get_strings("gamma")) out.push_back({label_for(mode, g), mode, parse_real(g), false});
  if (out.empty()) throw ConfigError("gamma list is empty");
  return out;
}

std::vector<double> sweep_taus(const RunConfig& cfg) {
  if (cfg.has("tau")) {
    auto t = cfg.get_list("tau");
    if (t.empty()) throw ConfigError("tau list is empty");
    return t;
  }
  const auto r = parse_range(cfg.get("tau_exp"));
  return log10_grid(r[0], r[1], r[2]);
}

std::string safe_label(std::string s) {
  for (char& c : s) {
    if (c == ':' || c == '/' || c == ' ') c = '-';
  }
  return s;
}

SweepRow make_row(const Variant& variant, std::uint64_t seed, double gamma, double tau, const SolveReport& rep) {
  SweepRow row{variant.label, seed, gamma, tau, rep.iters, to_string(rep.status), 0.0, 0.0};
  if (!rep.history.empty()) {
    row.rhat_full = rep.history.back().rhat_full;
    row.rhat_half = rep.history.back().rhat_half;
  }
  return row;
}

// Iterations each pruned run advances before the others get their turn.
constexpr int kPruneChunk = 1000;

TaskResult run_task(const RunConfig& cfg, const SweepSpec& spec, std::uint64_t seed, const Variant& variant,
                    const fs::path& out_dir, bool write_runs) {
  const Builder build = spec.make_builder(seed);
  const auto tol = cfg.get_double("tol");
  const auto max_iter = static_cast<int>(cfg.get_int("max_iter"));
  const auto record_every = static_cast<int>(cfg.get_int("record_every"));
  const std::size_t nt = spec.taus.size();

  std::vector<ProblemInstance> insts;
  std::vector<double> gammas(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    insts.push_back(build(spec.taus[i], variant, gammas[i]));
    insts[i].config.tol = tol;
    insts[i].config.max_iter = max_iter;
    insts[i].config.record_every = record_every;
  }
  auto write_run = [&](std::size_t i, const SolveReport& rep) {
    if (!write_runs) return;
    write_history_csv(out_dir / "runs" / fmt::format("{}_s{}_t{:03d}.csv", safe_label(variant.label), seed, i),
                      rep.history, spec.with_gap);
  };

  TaskResult res;
  if (!cfg.get_bool("prune")) {
    int best = -1;
    for (std::size_t i = 0; i < nt; ++i) {
      SolveReport rep = solve(insts[i].saddle, insts[i].config);
      if (rep.status == Status::converged && (best < 0 || rep.iters < best)) {
        best = rep.iters;
        res.best_history = rep.history;
      }
      write_run(i, rep);
      res.rows.push_back(make_row(variant, seed, gammas[i], spec.taus[i], rep));
    }
    return res;
  }

  // All step parameters advance together in chunks, each capped at the best
  // converged count so far; a run that reaches the cap can no longer win.
  // The best run per (seed, variant) is the same as without pruning.
  std::vector<Solver> runs;
  for (auto& inst : insts) {
    if (!write_runs) inst.config.record_every = std::max(max_iter, 1);
    runs.emplace_back(inst.saddle, inst.config);
  }
  int best = -1;
  std::size_t best_i = 0;
  for (long long until = kPruneChunk;; until += kPruneChunk) {
    bool active = false;
    for (std::size_t i = 0; i < nt; ++i) {
      if (runs[i].stopped() || (best >= 0 && runs[i].iters() >= best)) continue;
      const long long cap = best >= 0 ? std::min<long long>(until, best) : until;
      runs[i].advance(static_cast<int>(std::min<long long>(cap, max_iter)));
      if (runs[i].status() == Status::converged && (best < 0 || runs[i].iters() < best)) {
        best = runs[i].iters();
        best_i = i;
      }
    }
    for (std::size_t i = 0; i < nt; ++i) {
      active = active || (!runs[i].stopped() && (best < 0 || runs[i].iters() < best));
    }
    if (!active) break;
  }
  for (std::size_t i = 0; i < nt; ++i) {
    const bool cut = !runs[i].stopped();
    const SolveReport rep = runs[i].finish();
    SweepRow row = make_row(variant, seed, gammas[i], spec.taus[i], rep);
    if (cut) row.status = "pruned";
    write_run(i, rep);
    res.rows.push_back(std::move(row));
  }
  if (best >= 0) {
    // Re-run the winner with the configured history stride.
    insts[best_i].config.record_every = record_every;
    res.best_history = solve(insts[best_i].saddle, insts[best_i].config).history;
  }
  return res;
}

RunOutcome run_sweep(const RunConfig& cfg, const SweepSpec& spec, std::ostream& log) {
  const fs::path out_dir = cfg.get("out");
  const bool write_runs = emits(cfg, "csv");
  const bool want_svg = emits(cfg, "svg");
  const bool want_ratio = emits(cfg, "ratio");
  const auto seeds = cfg.get_int("seeds");
  const auto first_seed = cfg.get_int("seed");
  const auto workers = cfg.get_int("workers");
  if (seeds < 1) throw ConfigError("seeds must be positive");
  if (workers < 1) throw ConfigError("workers must be positive");
  if (cfg.get_int("max_iter") < 1) throw ConfigError("max_iter must be positive");

  struct Task {
    std::uint64_t seed;
    std::size_t variant;
  };
  std::vector<Task> tasks;
  for (long long s = 0; s < seeds; ++s) {
    for (std::size_t v = 0; v < spec.variants.size(); ++v) {
      tasks.push_back({static_cast<std::uint64_t>(first_seed + s), v});
    }
  }
  std::vector<TaskResult> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        const auto& task = tasks[t];
        const auto& variant = spec.variants[task.variant];
        results[t] = run_task(cfg, spec, task.seed, variant, out_dir, write_runs);
        std::lock_guard lock(log_mutex);
        int best = -1;
        for (const auto& r : results[t].rows) {
          if (r.status == "converged" && (best < 0 || r.iters < best)) best = r.iters;
        }
        log << fmt::format("seed {} {}: best iters {}\n", task.seed, variant.label,
                           best < 0 ? std::string("none") : std::to_string(best));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const auto nthreads = std::min<std::size_t>(static_cast<std::size_t>(workers), tasks.size());
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  RunOutcome out;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (auto& r : results[t].rows) out.rows.push_back(std::move(r));
    if (!results[t].best_history.empty()) {
      out.best_history[{spec.variants[tasks[t].variant].label, tasks[t].seed}] =
          std::move(results[t].best_history);
    }
  }
  out.best = best_runs(out.rows);
  std::string baseline = spec.variants.front().label;
  for (const auto& v : spec.variants) {
    if (!v.use_min && v.gamma == 1.0) {
      baseline = v.label;
      break;
    }
  }
  out.ratios = ratio_table(out.best, baseline);

  // Completed cells are flushed before a failing cell's error propagates.
  write_summary_csv(out_dir / "summary.csv", out.rows);
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (want_ratio) {
    write_best_csv(out_dir / "best.csv", out.best);
    write_ratio_csv(out_dir / "ratio.csv", out.ratios);
  }
  if (want_svg) {
    std::vector<Series> series;
    for (const auto& v : spec.variants) {
      const auto it = out.best_history.find({v.label, static_cast<std::uint64_t>(first_seed)});
      if (it == out.best_history.end()) continue;
      Series s{v.label, {}};
      for (const auto& h : it->second) s.points.emplace_back(h.k, spec.stop_on_half ? h.rhat_half : h.rhat_full);
      series.push_back(std::move(s));
    }
    std::ofstream svg(out_dir / "convergence.svg", std::ios::binary);
    if (!svg) throw io::IoError("cannot write " + (out_dir / "convergence.svg").string());
    svg << render_svg(series, fmt::format("{} seed {} (best tau)", cfg.problem, first_seed),
                      spec.stop_on_half ? "half-step residual" : "residual");
  }
  for (const auto& r : out.ratios) {
    log << fmt::format("{}: mean best iters {} ratio {:.2f}%\n", r.variant, fmt_real(r.mean_iters), r.ratio);
  }
  bool diverged = false;
  for (const auto& r : out.rows) diverged = diverged || r.status == "diverged";
  out.exit_code = diverged && !cfg.get_bool("expect_diverged") ? 2 : 0;
  return out;
}

SweepSpec game_spec(const RunConfig& cfg) {
  SweepSpec spec;
  spec.variants = gamma_variants(cfg, "pdhg");
  spec.taus = sweep_taus(cfg);
  spec.with_gap = cfg.get_bool("gap");
  const auto n = cfg.get_int("size");
  const auto m = cfg.has("rows") ? cfg.get_int("rows") : n;
  const auto gen = parse_game_generator(cfg.get("generator"));
  const bool gap = spec.with_gap;
  spec.make_builder = [n, m, gen, gap](std::uint64_t seed) -> Builder {
    const Mat k = random_game_matrix(m, n, gen, seed);
    const double knorm = std::sqrt(spectral_norm_sq(LinearOperator::dense(k)).value);
    return [k, knorm, gap](double tau, const Variant& v, double& g) {
      g = v.gamma;
      ProblemInstance inst = matrix_game(k, tau, v.gamma, knorm);
      if (gap) {
        inst.config.gap = [op = inst.saddle.K](const Vec& x, const Vec& y) {
          return duality_gap_matrix_game(op, x, y);
        };
      }
      return inst;
    };
  };
  return spec;
}

SweepSpec birkhoff_spec(const RunConfig& cfg) {
  SweepSpec spec;
  spec.stop_on_half = true;
  for (const auto& v : cfg.get_strings("variants")) {
    const auto colon = v.find(':');
    if (colon == std::string::npos) throw ConfigError("variant must look like mode:gamma, got '" + v + "'");
    Variant var{v, v.substr(0, colon), 0.0, false};
    if (var.mode != "pdhg" && var.mode != "ebalm") throw ConfigError("unknown Birkhoff mode '" + var.mode + "'");
    const std::string g = v.substr(colon + 1);
    if (g == "min") {
      var.use_min = true;
    } else {
      var.gamma = parse_real(g);
    }
    spec.variants.push_back(var);
  }
  if (spec.variants.empty()) throw ConfigError("variants list is empty");
  spec.taus = sweep_taus(cfg);
  const double theta = cfg.get_double("theta");
  const auto n = cfg.get_int("size");
  const std::string cost = cfg.get("cost");
  spec.make_builder = [n, theta, cost](std::uint64_t seed) -> Builder {
    const Mat c = cost.empty() ? random_birkhoff_cost(n, seed) : io::read_matrix(cost);
    return [c, theta](double tau_tilde, const Variant& v, double& g) {
      const double tau = birkhoff_tau(tau_tilde, c.rows());
      const bool ebalm = v.mode == "ebalm";
      // The PDHG counterpart of the smallest eBALM gamma keeps a little slack.
      g = !v.use_min ? v.gamma : ebalm ? birkhoff_ebalm_gamma_min(tau) : 0.751 / (1.0 + tau / 2.0);
      return birkhoff_projection(c, tau, ebalm ? BirkhoffMode::ebalm : BirkhoffMode::pdhg, g, theta);
    };
  };
  return spec;
}

SweepSpec emd_spec(const RunConfig& cfg) {
  SweepSpec spec;
  spec.stop_on_half = true;
  const std::string solver_name = cfg.get("solver");
  if (solver_name != "sgs" && solver_name != "iebalm") throw ConfigError("solver must be sgs or iebalm");
  const EmdSolver solver = solver_name == "sgs" ? EmdSolver::ebalm_sgs : EmdSolver::iebalm;
  spec.variants = gamma_variants(cfg, solver_name);
  spec.taus = sweep_taus(cfg);
  const auto [gm, gn] = parse_grid(cfg.get("grid"));
  const double h = cfg.has("grid_step") ? cfg.get_double("grid_step") : emd_default_h(gn);
  const double theta = cfg.get_double("theta");
  const bool allow_small = cfg.get_bool("allow_small_gamma");
  const std::string f0 = cfg.get("rho0"), f1 = cfg.get("rho1");
  if (f0.empty() != f1.empty()) throw ConfigError("give both rho0 and rho1 or neither");
  spec.make_builder = [=](std::uint64_t seed) -> Builder {
    auto pair = f0.empty() ? random_emd_pair(gm, gn, seed) : std::make_pair(io::read_matrix(f0), io::read_matrix(f1));
    return [pair, h, theta, solver, allow_small](double tau, const Variant& v, double& g) {
      g = v.gamma;
      return emd(pair.first, pair.second, h, tau, v.gamma, theta, solver, allow_small);
    };
  };
  return spec;
}

SweepSpec tvls_spec(const RunConfig& cfg) {
  SweepSpec spec;
  spec.variants = gamma_variants(cfg, "pdhg");
  spec.taus = sweep_taus(cfg);
  const auto [gm, gn] = parse_grid(cfg.get("grid"));
  const double density = cfg.get_double("density");
  const double lambda = cfg.get_double("lambda");
  const double theta = cfg.get_double("theta");
  const int epochs = static_cast<int>(cfg.get_int("inner_epochs"));
  const bool allow_small = cfg.get_bool("allow_small_gamma");
  const std::string rfile = cfg.get("r"), bfile = cfg.get("b");
  spec.make_builder = [=](std::uint64_t seed) -> Builder {
    const Index n = gm * gn;
    const SpMat r = rfile.empty() ? random_sparse_matrix(n / 2 > 0 ? n / 2 : 1, n, density, seed)
                                  : io::read_matrix_market(rfile);
    Vec b;
    if (bfile.empty()) {
      b = r * phantom(gm, gn);
    } else {
      const Mat bm = io::read_matrix(bfile);
      b = Eigen::Map<const Vec>(bm.data(), bm.size());
    }
    const double rnorm = spectral_norm_sq(LinearOperator::sparse(r)).value;
    return [=](double tau, const Variant& v, double& g) {
      g = v.gamma;
      return tv_least_squares(r, b, lambda, gm, gn, tau, v.gamma, theta, epochs, rnorm, allow_small);
    };
  };
  return spec;
}

RunOutcome run_counterexample(const RunConfig& cfg, std::ostream& log) {
  const fs::path out_dir = cfg.get("out");
  emits(cfg, "csv");
  const std::string kind = cfg.get("kind");
  const auto x0v = cfg.get_list("x0");
  if (x0v.size() != 2) throw ConfigError("x0 needs two entries");
  const Eigen::Vector2d x0(x0v[0], x0v[1]);
  const double tau = cfg.get_double("tau");
  const int max_iter = static_cast<int>(cfg.get_int("max_iter"));
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "summary.csv", std::ios::binary);
  if (!csv) throw io::IoError("cannot write " + (out_dir / "summary.csv").string());

  auto report = [&](const ToyDynamics& dyn, const std::string& lead) {
    const auto [mu1, mu2] = eig2(dyn.G);
    const Classification c = classify(dyn, x0, max_iter);
    csv << lead << ',' << fmt_real(dyn.tau) << ',' << fmt_real(dyn.sigma) << ',' << fmt_real(mu1.real()) << ','
        << fmt_real(mu1.imag()) << ',' << fmt_real(mu2.real()) << ',' << fmt_real(mu2.imag()) << ','
        << to_string(c.spectral) << ',' << to_string(c.simulated) << ',' << fmt_real(c.final_norm) << '\n';
    log << fmt::format("tau={} sigma={} mu=({}{:+}i, {}{:+}i) |mu|max={} verdict={} simulated={}\n",
                       fmt_real(dyn.tau), fmt_real(dyn.sigma), mu1.real(), mu1.imag(), mu2.real(), mu2.imag(),
                       std::abs(mu1), to_string(c.spectral), to_string(c.simulated));
  };

  if (kind == "bilinear") {
    csv << "tau_sigma,tau,sigma,mu1_re,mu1_im,mu2_re,mu2_im,spectral,simulated,final_norm\n";
    for (const auto& p : cfg.get_strings("taus")) {
      const double prod = parse_real(p);
      report(make_toy(ToyKind::bilinear, tau, prod / tau), fmt_real(prod));
    }
  } else if (kind == "quadratic") {
    csv << "rho3,tau,sigma,mu1_re,mu1_im,mu2_re,mu2_im,spectral,simulated,final_norm\n";
    for (const auto& row : rho2_boundary_scan(tau, cfg.get_list("rho3"))) {
      report(make_toy(ToyKind::quadratic, tau, row.sigma), fmt_real(row.rho3));
    }
  } else {
    throw ConfigError("kind must be bilinear or quadratic");
  }
  return {};
}

Metric metric_from_file(const std::string& path) {
  const Mat m = io::read_matrix(path);
  if (m.size() == 1) throw ConfigError("scalar metric needs a dimension; write it as a vector");
  if (m.rows() == 1 || m.cols() == 1) return Metric::diagonal(Eigen::Map<const Vec>(m.data(), m.size()));
  return Metric::dense(m);
}

RunOutcome run_check(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.has("k")) throw ConfigError("check needs --k");
  const std::string kpath = cfg.get("k");
  const LinearOperator k = fs::path(kpath).extension() == ".mtx"
                               ? LinearOperator::sparse(io::read_matrix_market(kpath))
                               : LinearOperator::dense(io::read_matrix(kpath));
  auto [d1, d2] = build_diag_preconditioner(k, cfg.get_double("alpha"), cfg.get_double("delta"),
                                            cfg.get_double("gamma1"), cfg.get_double("gamma2"));
  const Metric m1 = cfg.has("m1") ? metric_from_file(cfg.get("m1")) : d1;
  const Metric m2 = cfg.has("m2") ? metric_from_file(cfg.get("m2")) : d2;
  Vec sigma = Vec::Zero(k.cols());
  if (cfg.has("sigma_f")) {
    const Mat s = io::read_matrix(cfg.get("sigma_f"));
    sigma = Eigen::Map<const Vec>(s.data(), s.size());
  }
  const auto rep = check_condition(m1, sigma, m2, k, cfg.get_double("tol"), static_cast<int>(cfg.get_int("max_iter")));
  log << fmt::format("s_hat = {}\nthreshold = {}\nmargin = {}\nconverged = {}\niterations = {}\nverdict = {}\n",
                     fmt_real(rep.s_hat), fmt_real(rep.threshold), fmt_real(rep.margin), rep.converged,
                     rep.iterations, to_string(rep.verdict()));
  return {};
}

}  // namespace

RunOutcome run(const RunConfig& cfg, std::ostream& log) {
  if (cfg.problem == "game") return run_sweep(cfg, game_spec(cfg), log);
  if (cfg.problem == "birkhoff") return run_sweep(cfg, birkhoff_spec(cfg), log);
  if (cfg.problem == "emd") return run_sweep(cfg, emd_spec(cfg), log);
  if (cfg.problem == "tvls") return run_sweep(cfg, tvls_spec(cfg), log);
  if (cfg.problem == "counterexample") return run_counterexample(cfg, log);
  if (cfg.problem == "check") return run_check(cfg, log);
  throw ConfigError("unknown problem '" + cfg.problem + "'");
}

}  // namespace pdhg::cli
