#pragma once

#include "pdhg/metrics.hpp"
#include "pdhg/operators.hpp"
#include "pdhg/prox.hpp"
#include "pdhg/types.hpp"

#include <Eigen/Cholesky>

#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace pdhg {

/// min_x max_y f(x) + <Kx, y> - g*(y).
struct SaddleProblem {
  Proximable f;
  Proximable gstar;
  LinearOperator K;

  void validate() const;
};

enum class ResidualMode {
  full,      // computable bound from consecutive iterates
  linear_g,  // g* = <b, .>: primal feasibility ||Kx - b|| replaces the dual term
  custom,    // problem-supplied
};

struct Residuals {
  double full = 0.0;
  double half = 0.0;
};

/// Iterates around one step: (x_prev, y_prev) -> (x, y) -> (x_new, y_new).
struct ResidualContext {
  int k;
  const Vec& x_prev;
  const Vec& x;
  const Vec& x_new;
  const Vec& y_prev;
  const Vec& y;
  const Vec& y_new;
  const Vec& kx_new;
};

using ResidualFn = std::function<Residuals(const ResidualContext&)>;
using GapFn = std::function<double(const Vec& x, const Vec& y)>;

struct SolverConfig {
  SolverConfig(Metric m1, Metric m2) : M1(std::move(m1)), M2(std::move(m2)) {}

  Metric M1;
  Metric M2;
  double tol = 1e-6;
  int max_iter = 10000;
  ResidualMode residual_mode = ResidualMode::full;
  /// Stop on the half-step bound instead of the full one.
  bool stop_on_half = false;
  /// linear_g mode: report ||Kx - b|| / ||b|| (absolute when b = 0).
  bool relative_feasibility = false;
  ResidualFn custom_residual;
  GapFn gap;
  Vec x0;  // empty means zeros
  Vec y0;
  int record_every = 1;
  /// Skip the convergence-condition check (counter-example runs).
  bool override_condition = false;
  double blowup = 1e12;
  /// Block Gauss-Seidel epochs for box-constrained dual blocks under
  /// non-diagonal metrics.
  int inner_epochs = 2;
};

enum class Status { converged, max_iter, diverged };

const char* to_string(Status s);

struct HistoryRow {
  int k = 0;
  double rhat_full = 0.0;
  double rhat_half = 0.0;
  double gap = 0.0;  // NaN when not recorded
  double elapsed_s = 0.0;
};

struct SolveReport {
  Status status = Status::max_iter;
  int iters = 0;
  std::vector<HistoryRow> history;
  Vec x;
  Vec y;
  std::optional<ConditionReport> condition;
  /// Some subproblem was solved approximately.
  bool inexact = false;
};

namespace detail {
struct DualPlan;
}

/// Precomputed update rules for one (problem, metrics) pair. Construction
/// validates the combination and throws ConfigError when unsupported.
class StepKernel {
 public:
  StepKernel(const SaddleProblem& p, const Metric& m1, const Metric& m2, int inner_epochs = 2);
  ~StepKernel();
  StepKernel(StepKernel&&) noexcept;
  StepKernel& operator=(StepKernel&&) noexcept;

  /// argmin f(x) + <x, kty> + 1/2 ||x - xk||^2_M1.
  Vec primal(const Vec& xk, const Vec& kty) const;
  /// argmin g*(y) - <r, y> + 1/2 ||y - yk||^2_M2.
  Vec dual(const Vec& yk, const Vec& r) const;
  bool inexact() const;

 private:
  SaddleProblem p_;
  Metric m1_;
  Metric m2_;
  bool primal_diag_ = false;
  Vec m1_diag_;
  Vec f_shift_;      // S c - l for affine-quadratic f
  Vec f_s_;          // S diagonal
  std::optional<Eigen::LLT<Mat>> primal_llt_;  // (S + M1) when S != 0
  std::unique_ptr<detail::DualPlan> dual_;
};

/// One PrePDHG iteration with extrapolation factor 2.
std::pair<Vec, Vec> prepdhg_step(const SaddleProblem& p, const SolverConfig& cfg, const Vec& x, const Vec& y);

/// Resumable run. advance(n) iterates until iteration n, a stop or
/// cfg.max_iter; solve(p, cfg) is a Solver advanced to cfg.max_iter.
class Solver {
 public:
  /// Validates the inputs and, unless overridden, the convergence condition.
  Solver(const SaddleProblem& p, const SolverConfig& cfg);
  ~Solver();
  Solver(Solver&&) noexcept;
  Solver& operator=(Solver&&) noexcept;

  /// Returns true once the run has stopped (converged, diverged or max_iter).
  bool advance(int until);
  bool stopped() const;
  int iters() const;
  /// max_iter until the run stops for another reason.
  Status status() const;
  /// Ends the run; the last iterate is always in the history. The solver
  /// must not be used afterwards.
  SolveReport finish();

 private:
  struct State;
  std::unique_ptr<State> s_;
};

SolveReport solve(const SaddleProblem& p, const SolverConfig& cfg);

/// Both computable bounds for the step (x, y) -> (x_new, y_new), with
/// (x_prev, y_prev) the pair before (x, y).
Residuals residual_hat(const SaddleProblem& p, const Metric& m1, const Metric& m2, const Vec& x_new,
                       const Vec& x, const Vec& y_new, const Vec& y, const Vec& x_prev, const Vec& y_prev);

/// max_i (Kx)_i - min_j (K^T y)_j after projecting x, y onto their simplices.
double duality_gap_matrix_game(const LinearOperator& k, const Vec& x, const Vec& y);

struct SublinearDiagnostic {
  std::vector<std::pair<int, double>> curve;  // (t, sqrt(t) * min_{k<=t} rhat_k)
  bool flagged = false;
};

SublinearDiagnostic sublinear_diagnostic(const std::vector<HistoryRow>& history, bool use_half = false);

struct ConfiguredSolve {
  SaddleProblem problem;
  SolverConfig config;
};

inline constexpr double kEbalmGammaMin = 0.75;

/// f, K and g* = <b, .> with M1 = I/tau and M2 = gamma (tau K K^T + theta I).
ConfiguredSolve configure_ebalm(const Proximable& f, const LinearOperator& k, const Vec& b, double tau,
                                double theta, double gamma, bool allow_small_gamma = false);

/// As configure_ebalm but M2 is the sGS metric of Q = gamma tau K K^T + theta I
/// over the given block partition.
ConfiguredSolve configure_ebalm_sgs(const Proximable& f, const LinearOperator& k, const Vec& b, double tau,
                                    double theta, double gamma, const Partition& partition,
                                    bool allow_small_gamma = false);

/// Inexact variant: the y-update runs `epochs` forward block Gauss-Seidel
/// sweeps on Q. No convergence guarantee; the condition check is skipped.
ConfiguredSolve configure_iebalm(const Proximable& f, const LinearOperator& k, const Vec& b, double tau,
                                 double theta, double gamma, const Partition& partition, int epochs = 2);

}  // namespace pdhg
