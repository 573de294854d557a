#pragma once

#include "pdhg/metrics.hpp"
#include "pdhg/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pdhg {

enum class ProblemKind { matrix_game, birkhoff, emd, tvls };

struct ProblemInstance {
  ProblemKind kind;
  SaddleProblem saddle;
  SolverConfig config;
  /// Condition report computed by the builder (the config then skips the
  /// re-check in solve).
  std::optional<ConditionReport> condition;
  /// Raw data kept for oracles: K (game), C (Birkhoff), rho0 - rho1 (EMD).
  Mat data;
  Index grid_m = 0;
  Index grid_n = 0;
  double h = 0.0;
};

// ---- matrix game: min_{x in simplex_n} max_{y in simplex_m} <Kx, y> ----

enum class GameGenerator { uniform, normal, scaled_normal, sparse_uniform };

const char* to_string(GameGenerator g);
GameGenerator parse_game_generator(const std::string& s);

/// uniform: U[0,1]; normal: N(0,1); scaled_normal: 10 N(0,1);
/// sparse_uniform: U[0,1] entries kept with probability 0.1.
Mat random_game_matrix(Index m, Index n, GameGenerator gen, std::uint64_t seed);

/// tau = tau_tilde / ||K||, sigma = 1 / (gamma tau_tilde ||K||). gamma must
/// exceed 3/4. Pass k_norm > 0 to reuse a precomputed ||K||.
ProblemInstance matrix_game(const Mat& k, double tau_tilde, double gamma, double k_norm = 0.0);

// ---- projection onto the Birkhoff polytope ----

enum class BirkhoffMode { pdhg, ebalm };

/// tau = tau_tilde / sqrt(2n).
double birkhoff_tau(double tau_tilde, Index n);
/// Smallest admissible eBALM gamma, 0.75 / (1 + tau/2).
double birkhoff_ebalm_gamma_min(double tau);

/// Symmetric random cost (C + C^T)/2 with C uniform on [0, 1].
Mat random_birkhoff_cost(Index n, std::uint64_t seed);

/// pdhg: M2 = I/sigma with sigma = 1/(2n gamma tau), needs 1/gamma < (4/3)(1 + tau/2).
/// ebalm: M2 = gamma (tau K K^T + theta I), needs gamma >= 0.75/(1 + tau/2).
/// Both require the strict condition check to pass.
ProblemInstance birkhoff_projection(const Mat& c, double tau, BirkhoffMode mode, double gamma,
                                    double theta = 1e-4);

// ---- earth mover's distance on an M-by-N grid ----

enum class EmdSolver { ebalm_sgs, iebalm };

/// Default grid step (N - 1) / 4.
double emd_default_h(Index grid_n);

/// Random balanced pair of unit-mass densities.
std::pair<Mat, Mat> random_emd_pair(Index grid_m, Index grid_n, std::uint64_t seed);

/// M2 = gamma tau K K^T + theta I (sGS-split or solved inexactly). With theta = 0
/// and gamma = 3/4 the condition holds only with equality, so the default
/// theta is a small positive shift.
ProblemInstance emd(const Mat& rho0, const Mat& rho1, double h, double tau, double gamma, double theta = 1e-6,
                    EmdSolver solver = EmdSolver::ebalm_sgs, bool allow_small_gamma = false);

/// sum over grid nodes of ||(m1_ij, m2_ij)||.
double emd_objective(const Vec& flux, Index grid_m, Index grid_n);

// ---- TV-regularized least squares: 1/2 ||Rx - b||^2 + lambda ||Dx||_1 ----

/// Sparse random matrix with uniform [0,1] entries at the given density.
SpMat random_sparse_matrix(Index rows, Index cols, double density, std::uint64_t seed);

/// Piecewise-constant test image (vec, column-major) on an M-by-N grid.
Vec phantom(Index grid_m, Index grid_n);

/// 2D forward-difference gradient with h = 1 (the adjoint of the divergence).
LinearOperator tv_gradient(Index grid_m, Index grid_n);

/// max{||R^T y1 + D^T y2||, ||Rx - y1 - b||, dist(Dx, N_box(y2))}, with
/// y2 treated as on the box boundary within 1e-12 lambda.
double tv_kkt_residual(const LinearOperator& r, const LinearOperator& d, const Vec& b, double lambda, const Vec& x,
                       const Vec& y);

/// M1 = (2 gamma / tau) I, M2 = diag(tau ||R||^2 I, tau D D^T + theta I);
/// the box-constrained y2 update runs `inner_epochs` BCD sweeps.
ProblemInstance tv_least_squares(const SpMat& r, const Vec& b, double lambda, Index grid_m, Index grid_n, double tau,
                                 double gamma, double theta = 1e-3, int inner_epochs = 2, double r_norm_sq = 0.0,
                                 bool allow_small_gamma = false);

// ---- independent reference solvers ----

struct OracleResult {
  Vec x;
  Vec y;
  double objective = 0.0;
};

/// Small instances only: Birkhoff n <= 8 (Dykstra's alternating projections),
/// EMD grids up to 4x4 (log-barrier interior point on the second-order cone
/// program), matrix games with n, m <= 4 (LP vertex enumeration).
OracleResult oracle_solve(const ProblemInstance& inst);

Mat birkhoff_oracle(const Mat& c);
OracleResult emd_oracle(const Mat& rho_diff, Index grid_m, Index grid_n, double h);
OracleResult matrix_game_oracle(const Mat& k);

/// 10^a for a = a0, a0 + step, ..., a1 (inclusive, rounded to the step grid).
std::vector<double> log10_grid(double a0, double step, double a1);

}  // namespace pdhg
